use serde::{Deserialize, Serialize};

use super::{Screen, UiMode};
use crate::study::LikertResponse;
use crate::suggestions::SuggestionSet;

/// A single edit to a text field: `deleted` characters removed at character
/// position `pos`, then `inserted` placed there.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextDelta {
    pub pos: usize,
    pub deleted: usize,
    pub inserted: String,
}

impl TextDelta {
    /// Minimal single-region delta turning `old` into `new`.
    pub fn between(old: &str, new: &str) -> Option<TextDelta> {
        if old == new {
            return None;
        }
        let a: Vec<char> = old.chars().collect();
        let b: Vec<char> = new.chars().collect();
        let prefix = a.iter().zip(&b).take_while(|(x, y)| x == y).count();
        let suffix = a[prefix..]
            .iter()
            .rev()
            .zip(b[prefix..].iter().rev())
            .take_while(|(x, y)| x == y)
            .count();
        Some(TextDelta {
            pos: prefix,
            deleted: a.len() - prefix - suffix,
            inserted: b[prefix..b.len() - suffix].iter().collect(),
        })
    }

    /// One keystroke per character inserted or deleted.
    pub fn keystrokes(&self) -> usize {
        self.deleted + self.inserted.chars().count()
    }

    pub fn apply(&self, text: &str) -> Option<String> {
        let chars: Vec<char> = text.chars().collect();
        if self.pos + self.deleted > chars.len() {
            return None;
        }
        let mut out: String = chars[..self.pos].iter().collect();
        out.push_str(&self.inserted);
        out.extend(&chars[self.pos + self.deleted..]);
        Some(out)
    }
}

/// The email as recorded in the log, so logs replay without the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmailRecord {
    pub id: String,
    pub sender_name: String,
    pub subject: String,
    pub body: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalDecision {
    Accept,
    Discard,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Event {
    SessionStart {
        mode: UiMode,
        email: EmailRecord,
        briefing_id: String,
        seed: u64,
    },
    BriefingViewed {
        briefing_id: String,
    },
    SentenceSelected {
        anchor: usize,
        /// False when the tap closed the already-open widget.
        opened: bool,
    },
    WidgetTextChanged {
        anchor: usize,
        delta: TextDelta,
    },
    SuggestionShown {
        anchor: usize,
        set: SuggestionSet,
    },
    SuggestionPageChanged {
        anchor: usize,
        page: usize,
    },
    SuggestionAccepted {
        anchor: usize,
        suggestion_id: String,
        page: usize,
        text: String,
    },
    WidgetCollapsed {
        anchor: usize,
    },
    WidgetDeleted {
        anchor: usize,
    },
    ScreenChanged {
        from: Screen,
        to: Screen,
        /// Draft text at the moment of the switch.
        draft: String,
    },
    DraftEdited {
        delta: TextDelta,
    },
    ImproveRequested {
        draft: String,
    },
    ProposalShown {
        base_draft: String,
        improved_text: String,
    },
    ProposalAccepted {},
    ProposalDiscarded {},
    MsgPromptChanged {
        delta: TextDelta,
    },
    MsgGenerated {
        prompt: String,
        text: String,
    },
    MsgAccepted {
        text: String,
    },
    MsgDiscarded {},
    EmailSent {
        text: String,
    },
    LikertSubmitted {
        ratings: Vec<LikertResponse>,
    },
    CommentSubmitted {
        text: String,
    },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::SessionStart { .. } => "session_start",
            Event::BriefingViewed { .. } => "briefing_viewed",
            Event::SentenceSelected { .. } => "sentence_selected",
            Event::WidgetTextChanged { .. } => "widget_text_changed",
            Event::SuggestionShown { .. } => "suggestion_shown",
            Event::SuggestionPageChanged { .. } => "suggestion_page_changed",
            Event::SuggestionAccepted { .. } => "suggestion_accepted",
            Event::WidgetCollapsed { .. } => "widget_collapsed",
            Event::WidgetDeleted { .. } => "widget_deleted",
            Event::ScreenChanged { .. } => "screen_changed",
            Event::DraftEdited { .. } => "draft_edited",
            Event::ImproveRequested { .. } => "improve_requested",
            Event::ProposalShown { .. } => "proposal_shown",
            Event::ProposalAccepted {} => "proposal_accepted",
            Event::ProposalDiscarded {} => "proposal_discarded",
            Event::MsgPromptChanged { .. } => "msg_prompt_changed",
            Event::MsgGenerated { .. } => "msg_generated",
            Event::MsgAccepted { .. } => "msg_accepted",
            Event::MsgDiscarded {} => "msg_discarded",
            Event::EmailSent { .. } => "email_sent",
            Event::LikertSubmitted { .. } => "likert_submitted",
            Event::CommentSubmitted { .. } => "comment_submitted",
        }
    }

    /// Keystrokes this event represents.
    pub fn keystrokes(&self) -> usize {
        match self {
            Event::WidgetTextChanged { delta, .. }
            | Event::DraftEdited { delta }
            | Event::MsgPromptChanged { delta } => delta.keystrokes(),
            _ => 0,
        }
    }

    /// Suggestion, improvement or message-generation activity.
    pub fn is_ai(&self) -> bool {
        matches!(
            self,
            Event::SuggestionShown { .. }
                | Event::SuggestionPageChanged { .. }
                | Event::SuggestionAccepted { .. }
                | Event::ImproveRequested { .. }
                | Event::ProposalShown { .. }
                | Event::ProposalAccepted {}
                | Event::ProposalDiscarded {}
                | Event::MsgPromptChanged { .. }
                | Event::MsgGenerated { .. }
                | Event::MsgAccepted { .. }
                | Event::MsgDiscarded {}
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub t_ms: u64,
    #[serde(flatten)]
    pub event: Event,
}
