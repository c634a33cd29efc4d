use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::event::{Event, EventRecord};
use crate::segmenter::IncomingEmail;
use crate::suggestions::SuggestionSet;
use crate::trackdiff::ImprovementProposal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UiMode {
    #[serde(rename = "CDLR")]
    Cdlr,
    #[serde(rename = "MSG")]
    Msg,
    #[serde(rename = "NOAI")]
    NoAi,
}

impl UiMode {
    pub const ALL: [UiMode; 3] = [UiMode::Cdlr, UiMode::Msg, UiMode::NoAi];

    pub fn as_str(self) -> &'static str {
        match self {
            UiMode::Cdlr => "CDLR",
            UiMode::Msg => "MSG",
            UiMode::NoAi => "NOAI",
        }
    }
}

impl fmt::Display for UiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for UiMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        UiMode::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Screen {
    Reading,
    MsgGenerate,
    Draft,
}

impl Screen {
    pub fn as_str(self) -> &'static str {
        match self {
            Screen::Reading => "reading",
            Screen::MsgGenerate => "msg_generate",
            Screen::Draft => "draft",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidgetState {
    Open,
    Collapsed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Manual,
    Suggestion,
    SuggestionEdited,
}

/// One inline response widget anchored under a sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalResponse {
    pub anchor: usize,
    pub text: String,
    pub state: WidgetState,
    pub origin: Origin,
    pub accepted_suggestion_id: Option<String>,
    /// Version of the suggestion set this widget will accept.
    pub staleness_token: u64,
    pub suggestions: Option<SuggestionSet>,
    /// 1-based page currently shown.
    pub page: usize,
}

impl LocalResponse {
    pub fn is_open(&self) -> bool {
        self.state == WidgetState::Open
    }

    pub fn current_set(&self) -> Option<&SuggestionSet> {
        self.suggestions
            .as_ref()
            .filter(|s| s.token == self.staleness_token)
    }
}

/// Full reply-session state, rebuilt event by event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    pub mode: UiMode,
    pub email: IncomingEmail,
    pub briefing_id: String,
    pub seed: u64,
    pub screen: Screen,
    /// Sorted by anchor.
    pub local_responses: Vec<LocalResponse>,
    pub draft: String,
    pub pending_proposal: Option<ImprovementProposal>,
    pub msg_prompt: String,
    /// Generated message-level reply awaiting accept or reject.
    pub msg_pending: Option<String>,
    pub sent: bool,
    pub feedback_submitted: bool,
    pub next_token: u64,
    pub improve_count: u64,
    pub msg_generate_count: u64,
    pub last_seq: Option<u64>,
    pub last_t_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("log is empty")]
    Empty,
    #[error("first event must be session_start, found {0}")]
    MissingStart(&'static str),
    #[error("event {seq} ({kind}) cannot be applied: {reason}")]
    InvalidEvent {
        seq: u64,
        kind: &'static str,
        reason: String,
    },
}

impl SessionState {
    pub fn from_start(record: &EventRecord) -> Result<SessionState, ReplayError> {
        let Event::SessionStart {
            mode,
            email,
            briefing_id,
            seed,
        } = &record.event
        else {
            return Err(ReplayError::MissingStart(record.event.kind()));
        };
        Ok(SessionState {
            mode: *mode,
            email: IncomingEmail::new(
                email.id.clone(),
                email.sender_name.clone(),
                email.subject.clone(),
                email.body.clone(),
            ),
            briefing_id: briefing_id.clone(),
            seed: *seed,
            screen: Screen::Reading,
            local_responses: Vec::new(),
            draft: String::new(),
            pending_proposal: None,
            msg_prompt: String::new(),
            msg_pending: None,
            sent: false,
            feedback_submitted: false,
            next_token: 1,
            improve_count: 0,
            msg_generate_count: 0,
            last_seq: Some(record.seq),
            last_t_ms: record.t_ms,
        })
    }

    /// Rebuilds state from a complete or truncated event list.
    pub fn replay(records: &[EventRecord]) -> Result<SessionState, ReplayError> {
        let first = records.first().ok_or(ReplayError::Empty)?;
        let mut state = SessionState::from_start(first)?;
        for record in &records[1..] {
            state.apply(record)?;
        }
        Ok(state)
    }

    pub fn widget(&self, anchor: usize) -> Option<&LocalResponse> {
        self.local_responses.iter().find(|w| w.anchor == anchor)
    }

    fn widget_mut(&mut self, anchor: usize) -> Option<&mut LocalResponse> {
        self.local_responses.iter_mut().find(|w| w.anchor == anchor)
    }

    pub fn open_widget(&self) -> Option<&LocalResponse> {
        self.local_responses.iter().find(|w| w.is_open())
    }

    fn fresh_token(&mut self) -> u64 {
        let t = self.next_token;
        self.next_token += 1;
        t
    }

    /// Non-empty widget texts in anchor order, separated by blank lines.
    pub fn assemble_draft(&self) -> String {
        self.assemble_except(None)
    }

    /// Like [`assemble_draft`](Self::assemble_draft), leaving out one anchor.
    pub fn assemble_except(&self, skip: Option<usize>) -> String {
        self.local_responses
            .iter()
            .filter(|w| Some(w.anchor) != skip)
            .map(|w| w.text.trim())
            .filter(|t| !t.is_empty())
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    fn collapse(&mut self, anchor: usize) {
        let token = self.fresh_token();
        if let Some(w) = self.widget_mut(anchor) {
            w.state = WidgetState::Collapsed;
            w.staleness_token = token;
        }
    }

    fn collapse_open(&mut self) {
        if let Some(anchor) = self.open_widget().map(|w| w.anchor) {
            self.collapse(anchor);
        }
    }

    /// Pure reducer step.
    pub fn apply(&mut self, record: &EventRecord) -> Result<(), ReplayError> {
        let kind = record.event.kind();
        let seq = record.seq;
        let invalid = |reason: &str| ReplayError::InvalidEvent {
            seq,
            kind,
            reason: reason.to_owned(),
        };
        if self.last_seq.is_some_and(|s| seq <= s) {
            return Err(invalid("sequence number not increasing"));
        }
        if record.t_ms < self.last_t_ms {
            return Err(invalid("timestamp went backwards"));
        }

        match &record.event {
            Event::SessionStart { .. } => return Err(invalid("duplicate session_start")),
            Event::BriefingViewed { .. } => {}
            Event::SentenceSelected { anchor, .. } => {
                let anchor = *anchor;
                if anchor >= self.email.sentences.len() {
                    return Err(invalid("anchor out of range"));
                }
                if self.widget(anchor).is_some_and(LocalResponse::is_open) {
                    self.collapse(anchor);
                } else {
                    self.collapse_open();
                    let token = self.fresh_token();
                    match self.widget_mut(anchor) {
                        Some(w) => {
                            w.state = WidgetState::Open;
                            w.staleness_token = token;
                            w.suggestions = None;
                            w.page = 1;
                        }
                        None => {
                            let pos = self.local_responses.partition_point(|w| w.anchor < anchor);
                            self.local_responses.insert(
                                pos,
                                LocalResponse {
                                    anchor,
                                    text: String::new(),
                                    state: WidgetState::Open,
                                    origin: Origin::Manual,
                                    accepted_suggestion_id: None,
                                    staleness_token: token,
                                    suggestions: None,
                                    page: 1,
                                },
                            );
                        }
                    }
                }
            }
            Event::WidgetTextChanged { anchor, delta } => {
                let token = self.fresh_token();
                let w = self
                    .widget_mut(*anchor)
                    .filter(|w| w.is_open())
                    .ok_or_else(|| invalid("widget not open"))?;
                w.text = delta
                    .apply(&w.text)
                    .ok_or_else(|| invalid("delta out of range"))?;
                w.origin = if w.accepted_suggestion_id.is_some() {
                    Origin::SuggestionEdited
                } else {
                    Origin::Manual
                };
                w.staleness_token = token;
            }
            Event::SuggestionShown { anchor, set } => {
                let w = self
                    .widget_mut(*anchor)
                    .filter(|w| w.is_open() && w.staleness_token == set.token)
                    .ok_or_else(|| invalid("stale suggestion set"))?;
                w.suggestions = Some(set.clone());
                w.page = 1;
            }
            Event::SuggestionPageChanged { anchor, page } => {
                let w = self
                    .widget_mut(*anchor)
                    .ok_or_else(|| invalid("no such widget"))?;
                w.page = *page;
            }
            Event::SuggestionAccepted {
                anchor,
                suggestion_id,
                text,
                ..
            } => {
                let w = self
                    .widget_mut(*anchor)
                    .filter(|w| w.is_open())
                    .ok_or_else(|| invalid("widget not open"))?;
                w.text = text.clone();
                w.origin = Origin::Suggestion;
                w.accepted_suggestion_id = Some(suggestion_id.clone());
                self.collapse(*anchor);
            }
            Event::WidgetCollapsed { anchor } => {
                if self.widget(*anchor).is_none() {
                    return Err(invalid("no such widget"));
                }
                self.collapse(*anchor);
            }
            Event::WidgetDeleted { anchor } => {
                let before = self.local_responses.len();
                self.local_responses.retain(|w| w.anchor != *anchor);
                if self.local_responses.len() == before {
                    return Err(invalid("no such widget"));
                }
            }
            Event::ScreenChanged { from, to, draft } => {
                if *from != self.screen {
                    return Err(invalid("screen mismatch"));
                }
                if self.mode == UiMode::Cdlr && *from == Screen::Reading {
                    self.collapse_open();
                }
                self.draft = draft.clone();
                self.screen = *to;
            }
            Event::DraftEdited { delta } => {
                self.draft = delta
                    .apply(&self.draft)
                    .ok_or_else(|| invalid("delta out of range"))?;
            }
            Event::ImproveRequested { .. } => {
                self.improve_count += 1;
            }
            Event::ProposalShown {
                base_draft,
                improved_text,
            } => {
                if *base_draft != self.draft {
                    return Err(invalid("proposal base differs from draft"));
                }
                self.pending_proposal = Some(ImprovementProposal::new(
                    base_draft.clone(),
                    improved_text.clone(),
                ));
            }
            Event::ProposalAccepted {} => {
                let p = self
                    .pending_proposal
                    .take()
                    .ok_or_else(|| invalid("no pending proposal"))?;
                self.draft = p.improved_text;
            }
            Event::ProposalDiscarded {} => {
                self.pending_proposal
                    .take()
                    .ok_or_else(|| invalid("no pending proposal"))?;
            }
            Event::MsgPromptChanged { delta } => {
                self.msg_prompt = delta
                    .apply(&self.msg_prompt)
                    .ok_or_else(|| invalid("delta out of range"))?;
            }
            Event::MsgGenerated { text, .. } => {
                self.msg_generate_count += 1;
                self.msg_pending = Some(text.clone());
            }
            Event::MsgAccepted { text } => {
                self.msg_pending = None;
                self.draft = text.clone();
            }
            Event::MsgDiscarded {} => {
                self.msg_pending = None;
            }
            Event::EmailSent { .. } => {
                self.sent = true;
            }
            Event::LikertSubmitted { .. } => {
                self.feedback_submitted = true;
            }
            Event::CommentSubmitted { .. } => {}
        }
        self.last_seq = Some(seq);
        self.last_t_ms = record.t_ms;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form. Equal states give equal
    /// digests on any platform.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("state serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Structural invariants that must hold after every operation.
    pub fn check_invariants(&self) -> Result<(), String> {
        let open = self.local_responses.iter().filter(|w| w.is_open()).count();
        if open > 1 {
            return Err(format!("{open} widgets open"));
        }
        if self
            .local_responses
            .windows(2)
            .any(|p| p[0].anchor >= p[1].anchor)
        {
            return Err("widgets not unique and sorted by anchor".into());
        }
        if let Some(p) = &self.pending_proposal {
            if p.base_draft != self.draft {
                return Err("draft changed under a pending proposal".into());
            }
        }
        for w in &self.local_responses {
            if w.origin == Origin::Suggestion {
                let accepted = w.accepted_suggestion_id.is_some();
                if !accepted {
                    return Err(format!(
                        "widget {} has suggestion origin without id",
                        w.anchor
                    ));
                }
            }
        }
        if self.mode == UiMode::NoAi && !self.local_responses.is_empty() {
            return Err("widgets in a NOAI session".into());
        }
        Ok(())
    }
}
