//! Counterbalanced study plans, the task corpus and the post-task
//! questionnaire.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::segmenter::IncomingEmail;
use crate::session::{Session, SessionError, UiMode};

pub const TASKS_PER_PARTICIPANT: usize = 9;
pub const BLOCK_SIZE: usize = 3;

/// Row `p % 3` gives the mode order of participant `p`.
pub const LATIN_SQUARE: [[UiMode; 3]; 3] = [
    [UiMode::Cdlr, UiMode::Msg, UiMode::NoAi],
    [UiMode::Msg, UiMode::NoAi, UiMode::Cdlr],
    [UiMode::NoAi, UiMode::Cdlr, UiMode::Msg],
];

/// Corpus order of the nine topics.
pub const TOPIC_IDS: [&str; TASKS_PER_PARTICIPANT] = [
    "e1_idea_pitch",
    "e2_reunion",
    "e3_sales_offer",
    "e4_lunch",
    "e5_slogan",
    "e6_proofreading",
    "e7_deadline",
    "e8_server_access",
    "e9_gift",
];

/// One email task with its briefing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub sender_name: String,
    pub subject: String,
    pub body: String,
    pub briefing_text: String,
    /// Facts the reply must convey, used for the conformity worksheet.
    #[serde(default)]
    pub key_facts: Vec<String>,
}

impl CorpusEntry {
    pub fn email(&self) -> IncomingEmail {
        IncomingEmail::new(&*self.id, &*self.sender_name, &*self.subject, &*self.body)
    }

    /// Briefings bind one-to-one to emails and share their id.
    pub fn briefing_id(&self) -> &str {
        &self.id
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskAssignment {
    pub serial_position: usize,
    pub email_index: usize,
    pub email_id: String,
    pub briefing_id: String,
    pub mode: UiMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyPlan {
    pub participant_index: u64,
    pub tasks: Vec<TaskAssignment>,
}

impl StudyPlan {
    pub fn task(&self, index: usize) -> Result<&TaskAssignment, StudyError> {
        self.tasks.get(index).ok_or(StudyError::UnknownTask(index))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StudyError {
    #[error("unknown task {0}")]
    UnknownTask(usize),
    #[error("email {0} not in corpus")]
    MissingEmail(String),
}

/// Plan over the default topic ids.
pub fn build_plan(participant_index: u64) -> StudyPlan {
    build_plan_for(participant_index, &TOPIC_IDS)
}

/// Mode blocks follow row `p mod 3` of [`LATIN_SQUARE`]. The nine topics are
/// split into three triples in corpus order; block `b` gets triple
/// `(b + (p div 3) mod 3) mod 3`.
pub fn build_plan_for(
    participant_index: u64,
    email_ids: &[impl AsRef<str>; TASKS_PER_PARTICIPANT],
) -> StudyPlan {
    let row = (participant_index % 3) as usize;
    let rotation = ((participant_index / 3) % 3) as usize;
    let mut tasks = Vec::with_capacity(TASKS_PER_PARTICIPANT);
    for (block, &mode) in LATIN_SQUARE[row].iter().enumerate() {
        let triple = (block + rotation) % 3;
        for k in 0..BLOCK_SIZE {
            let email_index = triple * BLOCK_SIZE + k;
            let id = email_ids[email_index].as_ref().to_owned();
            tasks.push(TaskAssignment {
                serial_position: tasks.len(),
                email_index,
                briefing_id: id.clone(),
                email_id: id,
                mode,
            });
        }
    }
    StudyPlan {
        participant_index,
        tasks,
    }
}

/// Session seed for a participant's task. Every driver (HTTP, CLI, tests)
/// uses this so the same task generates the same text everywhere.
pub fn session_seed(participant_index: u64, task_index: usize) -> u64 {
    participant_index
        .wrapping_mul(1_000_003)
        .wrapping_add(task_index as u64 + 1)
}

/// Returns the briefing for a task and logs the access on its session.
pub fn get_briefing<'a>(
    plan: &StudyPlan,
    corpus: &'a [CorpusEntry],
    task_index: usize,
    session: Option<&mut Session>,
) -> Result<&'a str, StudyError> {
    let task = plan.task(task_index)?;
    let entry = corpus
        .iter()
        .find(|e| e.id == task.email_id)
        .ok_or_else(|| StudyError::MissingEmail(task.email_id.clone()))?;
    if let Some(s) = session {
        s.view_briefing()
            .expect("briefing views are always allowed");
    }
    Ok(&entry.briefing_text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikertItem {
    Helpful,
    Quick,
    Quality,
    Control,
}

impl LikertItem {
    pub const ALL: [LikertItem; 4] = [
        LikertItem::Helpful,
        LikertItem::Quick,
        LikertItem::Quality,
        LikertItem::Control,
    ];

    pub fn statement(self) -> &'static str {
        match self {
            LikertItem::Helpful => "The app interface was helpful",
            LikertItem::Quick => "The app interface helped me reply to the email quickly",
            LikertItem::Quality => "The app interface helped me write a good reply",
            LikertItem::Control => "I was in control of the content of my reply",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikertResponse {
    pub item: LikertItem,
    pub rating: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeedbackError {
    #[error("expected one rating for each of the 4 items")]
    IncompleteLikert,
    #[error("rating {0} outside 1..=5")]
    RatingOutOfRange(u8),
}

impl FeedbackError {
    pub fn code(&self) -> &'static str {
        match self {
            FeedbackError::IncompleteLikert => "incomplete_likert",
            FeedbackError::RatingOutOfRange(_) => "rating_out_of_range",
        }
    }
}

/// Checks that every item is rated exactly once on the 1..5 scale and
/// returns the ratings in item order.
pub fn validate_likert(
    mut ratings: Vec<LikertResponse>,
) -> Result<Vec<LikertResponse>, FeedbackError> {
    if let Some(bad) = ratings.iter().find(|r| !(1..=5).contains(&r.rating)) {
        return Err(FeedbackError::RatingOutOfRange(bad.rating));
    }
    ratings.sort_by_key(|r| r.item);
    let items: Vec<_> = ratings.iter().map(|r| r.item).collect();
    if items != LikertItem::ALL {
        return Err(FeedbackError::IncompleteLikert);
    }
    Ok(ratings)
}

/// Feedback recording lives on the session; this is the study-level entry.
pub fn record_feedback(
    session: &mut Session,
    ratings: Vec<LikertResponse>,
    comment: Option<&str>,
) -> Result<(), SessionError> {
    session.record_feedback(ratings, comment)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_are_contiguous_and_cover_every_email() {
        for p in 0..30 {
            let plan = build_plan(p);
            assert_eq!(plan.tasks.len(), 9);
            let mut seen: Vec<_> = plan.tasks.iter().map(|t| t.email_index).collect();
            seen.sort();
            assert_eq!(seen, (0..9).collect::<Vec<_>>());
            for block in plan.tasks.chunks(3) {
                assert!(block.iter().all(|t| t.mode == block[0].mode));
            }
        }
    }

    #[test]
    fn plan_is_deterministic() {
        assert_eq!(build_plan(4), build_plan(4));
        assert_ne!(build_plan(4), build_plan(5));
    }

    #[test]
    fn likert_validation() {
        let full: Vec<_> = LikertItem::ALL
            .iter()
            .rev()
            .map(|&item| LikertResponse { item, rating: 3 })
            .collect();
        let ok = validate_likert(full.clone()).unwrap();
        assert_eq!(ok[0].item, LikertItem::Helpful);
        assert_eq!(
            validate_likert(full[..3].to_vec()),
            Err(FeedbackError::IncompleteLikert)
        );
        let mut dup = full.clone();
        dup[0].item = LikertItem::Quick;
        assert_eq!(validate_likert(dup), Err(FeedbackError::IncompleteLikert));
        let mut high = full;
        high[2].rating = 6;
        assert_eq!(
            validate_likert(high),
            Err(FeedbackError::RatingOutOfRange(6))
        );
    }

    #[test]
    fn unknown_task() {
        let plan = build_plan(0);
        assert_eq!(
            get_briefing(&plan, &[], 9, None),
            Err(StudyError::UnknownTask(9))
        );
    }
}
