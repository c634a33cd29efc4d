use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::checker::{error_rate, Checker, CheckerError, NaiveChecker};
use super::textmetrics::{distinct2, edit_distance, structure_flags};
use crate::session::{
    read_log, Event, LogError, LogHeader, ReplayError, Screen, SessionLog, SessionState, UiMode,
};
use crate::suggestions::SuggestionSource;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("malformed log at line {line}: {message}")]
    MalformedLog { line: usize, message: String },
    #[error("session has no email_sent event")]
    IncompleteSession,
    #[error(transparent)]
    InvalidLog(#[from] ReplayError),
    #[error(transparent)]
    Checker(#[from] CheckerError),
}

impl From<LogError> for AnalyticsError {
    fn from(e: LogError) -> Self {
        match e {
            LogError::Malformed { line, message } => AnalyticsError::MalformedLog { line, message },
            LogError::Io(e) => AnalyticsError::MalformedLog {
                line: 0,
                message: e.to_string(),
            },
        }
    }
}

/// Sentence-level interaction details of a CDLR session.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CdlrStats {
    pub sentence_count: usize,
    /// Distinct sentences whose widget was opened at least once.
    pub sentences_tapped: usize,
    /// Tapped sentences that still carried text at finalize.
    pub sentences_replied: usize,
    /// Of those, how many ended with accepted suggestion text.
    pub replied_with_suggestion: usize,
    /// Page number of each accepted suggestion.
    pub accepted_pages: Vec<usize>,
    pub accepted_without_prompt: usize,
    /// Accepted suggestions whose widget text was not changed afterwards.
    pub accepted_unedited: usize,
    pub manual_text_entered: bool,
    pub improve_requests: usize,
    pub improvements_accepted: usize,
    /// Whether the sent text equals the last accepted improvement.
    pub last_improvement_sent_unchanged: Option<bool>,
    /// Edit distance from the last accepted improvement to the sent text,
    /// when they differ.
    pub edit_distance_after_improvement: Option<usize>,
}

/// Message-level generation details of a MSG session.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MsgStats {
    pub generations: usize,
    pub first_generation_accepted: bool,
    pub prompt_before_first_generation: bool,
    pub sent_unedited: bool,
    pub edit_distance_after_accept: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub mode: UiMode,
    pub email_id: String,
    pub completion_time_s: f64,
    pub keystrokes: usize,
    pub writing_speed_cps: f64,
    pub reply_length_chars: usize,
    pub distinct2: f64,
    pub error_rate: f64,
    pub used_improve: bool,
    /// CDLR only: nothing typed or accepted before leaving the first screen.
    pub skipped_local_response: bool,
    pub time_per_screen: BTreeMap<String, f64>,
    pub salutation_present: bool,
    pub closing_present: bool,
    pub briefing_views: usize,
    pub cdlr: Option<CdlrStats>,
    pub msg: Option<MsgStats>,
    pub workflow: Option<WorkflowPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkflowPoint {
    /// Fraction of the task time elapsed at the first reading-to-draft switch.
    pub norm_time: f64,
    /// Draft length at the switch over the final reply length.
    pub norm_length: f64,
    pub used_improve: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replayed {
    pub header: Option<LogHeader>,
    pub state: SessionState,
    pub metrics: SessionMetrics,
}

/// Replays a JSONL log with the default checker.
pub fn replay(log_text: &str) -> Result<Replayed, AnalyticsError> {
    replay_with(log_text, &NaiveChecker)
}

pub fn replay_with(log_text: &str, checker: &dyn Checker) -> Result<Replayed, AnalyticsError> {
    let log = read_log(log_text)?;
    replay_log(&log, checker)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

pub fn replay_log(log: &SessionLog, checker: &dyn Checker) -> Result<Replayed, AnalyticsError> {
    let first = log.events.first().ok_or(ReplayError::Empty)?;
    let mut state = SessionState::from_start(first)?;
    let t0 = first.t_ms;

    let mut keystrokes = 0;
    let mut sent: Option<(u64, String)> = None;
    let mut screen_since = (Screen::Reading, t0);
    let mut screen_ms: BTreeMap<Screen, u64> = BTreeMap::new();
    let mut first_switch: Option<(u64, usize)> = None;
    let mut typed_before_switch = false;
    let mut accepted_before_switch = false;
    let mut briefing_views = 0;

    let mut tapped = BTreeSet::new();
    let mut accepted_pages = Vec::new();
    let mut accepted_without_prompt = 0;
    let mut manual_text = false;
    let mut last_improvement: Option<String> = None;
    let mut improvements_accepted = 0;
    let mut msg_generations = 0;
    let mut msg_first_accepted = None;
    let mut msg_prompt_before_first = false;
    let mut msg_accepted_text: Option<String> = None;
    let mut finalize_widgets: Vec<(usize, String, Option<String>)> = Vec::new();

    for record in &log.events[1..] {
        // Snapshot what the event refers to before it mutates state.
        let pre = match &record.event {
            Event::SuggestionAccepted {
                anchor,
                suggestion_id,
                ..
            } => state
                .widget(*anchor)
                .and_then(|w| w.current_set())
                .and_then(|s| s.get(suggestion_id))
                .map(|s| s.source),
            _ => None,
        };
        state.apply(record)?;
        if sent.is_some() {
            if let Event::BriefingViewed { .. } = record.event {
                briefing_views += 1;
            }
            continue;
        }
        keystrokes += record.event.keystrokes();
        match &record.event {
            Event::BriefingViewed { .. } => briefing_views += 1,
            Event::SentenceSelected { anchor, opened } => {
                if *opened {
                    tapped.insert(*anchor);
                }
            }
            Event::WidgetTextChanged { .. } => {
                manual_text = true;
                if first_switch.is_none() {
                    typed_before_switch = true;
                }
            }
            Event::SuggestionAccepted { page, .. } => {
                accepted_pages.push(*page);
                if pre == Some(SuggestionSource::NoInput) {
                    accepted_without_prompt += 1;
                }
                if first_switch.is_none() {
                    accepted_before_switch = true;
                }
            }
            Event::ScreenChanged { from, to, draft } => {
                *screen_ms.entry(*from).or_default() += record.t_ms - screen_since.1;
                screen_since = (*to, record.t_ms);
                if *from == Screen::Reading && first_switch.is_none() {
                    first_switch = Some((record.t_ms, draft.chars().count()));
                    finalize_widgets = state
                        .local_responses
                        .iter()
                        .map(|w| (w.anchor, w.text.clone(), w.accepted_suggestion_id.clone()))
                        .collect();
                }
            }
            Event::ProposalAccepted {} => {
                improvements_accepted += 1;
                last_improvement = Some(state.draft.clone());
            }
            Event::MsgPromptChanged { .. } => {
                if msg_generations == 0 {
                    msg_prompt_before_first = true;
                }
            }
            Event::MsgGenerated { .. } => msg_generations += 1,
            Event::MsgAccepted { text } => {
                if msg_first_accepted.is_none() {
                    msg_first_accepted = Some(msg_generations == 1);
                }
                msg_accepted_text = Some(text.clone());
            }
            Event::EmailSent { text } => {
                *screen_ms.entry(screen_since.0).or_default() += record.t_ms - screen_since.1;
                sent = Some((record.t_ms, text.clone()));
            }
            _ => {}
        }
    }

    let (t_sent, text) = sent.ok_or(AnalyticsError::IncompleteSession)?;
    let completion_ms = t_sent - t0;
    let completion_time_s = completion_ms as f64 / 1000.0;
    let reply_length_chars = text.chars().count();
    let flags = structure_flags(&text);
    let used_improve = state.improve_count > 0;
    let mode = state.mode;

    let cdlr = (mode == UiMode::Cdlr).then(|| {
        let mut accepted_unedited = 0;
        let mut replied_with_suggestion = 0;
        for (_, text, accepted) in &finalize_widgets {
            if let Some(id) = accepted {
                let original = log.events.iter().find_map(|r| match &r.event {
                    Event::SuggestionAccepted {
                        suggestion_id,
                        text,
                        ..
                    } if suggestion_id == id => Some(text),
                    _ => None,
                });
                if original == Some(text) {
                    accepted_unedited += 1;
                }
                if !text.trim().is_empty() {
                    replied_with_suggestion += 1;
                }
            }
        }
        CdlrStats {
            sentence_count: state.email.sentences.len(),
            sentences_tapped: tapped.len(),
            sentences_replied: finalize_widgets
                .iter()
                .filter(|(_, t, _)| !t.trim().is_empty())
                .count(),
            replied_with_suggestion,
            accepted_pages,
            accepted_without_prompt,
            accepted_unedited,
            manual_text_entered: manual_text,
            improve_requests: state.improve_count as usize,
            improvements_accepted,
            last_improvement_sent_unchanged: last_improvement.as_ref().map(|t| *t == text),
            edit_distance_after_improvement: last_improvement
                .as_ref()
                .filter(|t| **t != text)
                .map(|t| edit_distance(t, &text)),
        }
    });

    let msg = (mode == UiMode::Msg).then(|| MsgStats {
        generations: msg_generations,
        first_generation_accepted: msg_first_accepted.unwrap_or(false),
        prompt_before_first_generation: msg_prompt_before_first,
        sent_unedited: msg_accepted_text.as_ref() == Some(&text),
        edit_distance_after_accept: msg_accepted_text
            .as_ref()
            .filter(|t| **t != text)
            .map(|t| edit_distance(t, &text)),
    });

    let workflow = match (mode, first_switch) {
        (UiMode::Cdlr, Some((t, len))) => Some(WorkflowPoint {
            norm_time: ratio((t - t0) as f64, completion_ms as f64).clamp(0.0, 1.0),
            norm_length: ratio(len as f64, reply_length_chars as f64),
            used_improve,
        }),
        _ => None,
    };

    let metrics = SessionMetrics {
        mode,
        email_id: state.email.id.clone(),
        completion_time_s,
        keystrokes,
        writing_speed_cps: ratio(reply_length_chars as f64, completion_time_s),
        reply_length_chars,
        distinct2: distinct2(&text),
        error_rate: error_rate(&text, checker)?,
        used_improve,
        skipped_local_response: mode == UiMode::Cdlr
            && !typed_before_switch
            && !accepted_before_switch,
        time_per_screen: screen_ms
            .into_iter()
            .map(|(s, ms)| (s.as_str().to_owned(), ms as f64 / 1000.0))
            .collect(),
        salutation_present: flags.salutation_present,
        closing_present: flags.closing_present,
        briefing_views,
        cdlr,
        msg,
        workflow,
    };
    Ok(Replayed {
        header: log.header.clone(),
        state,
        metrics,
    })
}

/// Workflow points of the CDLR sessions, plus how many CDLR sessions had no
/// screen switch and were left out.
pub fn workflow_points(sessions: &[SessionMetrics]) -> (Vec<WorkflowPoint>, usize) {
    let cdlr: Vec<_> = sessions.iter().filter(|m| m.mode == UiMode::Cdlr).collect();
    let points: Vec<_> = cdlr.iter().filter_map(|m| m.workflow).collect();
    let omitted = cdlr.len() - points.len();
    (points, omitted)
}
