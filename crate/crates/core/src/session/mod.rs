//! Reply-session state machine for the three UI modes.
//!
//! Every mutating operation validates against the current [`SessionState`],
//! then emits one or more [`Event`]s. State only changes by applying events
//! through [`SessionState::apply`], so replaying the log reproduces it.

mod clock;
mod event;
mod log;
mod state;

pub use clock::{Clock, ManualClock, SystemClock};
pub use event::{EmailRecord, Event, EventRecord, ProposalDecision, TextDelta};
pub use log::{read_log, JsonlWriter, LogError, LogHeader, SessionLog};
pub use state::{LocalResponse, Origin, ReplayError, Screen, SessionState, UiMode, WidgetState};

use thiserror::Error;

use crate::prompting::LlmClient;
use crate::segmenter::IncomingEmail;
use crate::study::{validate_likert, FeedbackError, LikertResponse};
use crate::suggestions::{
    generate_improvement, generate_local_suggestions, generate_message_reply, GenerationOptions,
    SuggestionError, SuggestionRequest, SuggestionSet,
};
use crate::trackdiff::ImprovementProposal;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("session already sent")]
    SessionClosed,
    #[error("operation not available in {0} mode")]
    WrongMode(UiMode),
    #[error("operation not available on the {} screen", .0.as_str())]
    WrongScreen(Screen),
    #[error("sentence index {0} out of range")]
    InvalidIndex(usize),
    #[error("no open widget at sentence {0}")]
    WidgetNotOpen(usize),
    #[error("no widget at sentence {0}")]
    NoSuchWidget(usize),
    #[error("widget at sentence {0} still has text")]
    NonEmptyDelete(usize),
    #[error("suggestion set is stale")]
    StaleSuggestion,
    #[error("unknown suggestion {0}")]
    UnknownSuggestion(String),
    #[error("page {0} does not exist")]
    InvalidPage(usize),
    #[error("an improvement proposal is already pending")]
    ProposalPending,
    #[error("no improvement proposal pending")]
    NoProposal,
    #[error("draft changed while the improvement was generated")]
    DraftChanged,
    #[error("no generated message pending")]
    NoMessage,
    #[error("email not sent yet")]
    SessionNotSent,
    #[error("feedback already submitted")]
    FeedbackSubmitted,
    #[error(transparent)]
    Feedback(#[from] FeedbackError),
    #[error(transparent)]
    Generation(#[from] SuggestionError),
    #[error("internal state error: {0}")]
    Internal(String),
}

impl SessionError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::SessionClosed => "session_closed",
            SessionError::WrongMode(_) => "wrong_mode",
            SessionError::WrongScreen(_) => "wrong_screen",
            SessionError::InvalidIndex(_) => "invalid_index",
            SessionError::WidgetNotOpen(_) => "widget_not_open",
            SessionError::NoSuchWidget(_) => "no_such_widget",
            SessionError::NonEmptyDelete(_) => "non_empty_delete",
            SessionError::StaleSuggestion => "stale_suggestion",
            SessionError::UnknownSuggestion(_) => "unknown_suggestion",
            SessionError::InvalidPage(_) => "invalid_page",
            SessionError::ProposalPending => "proposal_pending",
            SessionError::NoProposal => "no_proposal",
            SessionError::DraftChanged => "draft_changed",
            SessionError::NoMessage => "no_message",
            SessionError::SessionNotSent => "session_not_sent",
            SessionError::FeedbackSubmitted => "feedback_submitted",
            SessionError::Feedback(e) => e.code(),
            SessionError::Generation(SuggestionError::Prompt(_)) => "prompt_error",
            SessionError::Generation(_) => "model_unavailable",
            SessionError::Internal(_) => "internal",
        }
    }
}

/// A pending improvement call, prepared under the session lock and run
/// outside it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImproveJob {
    pub draft: String,
    pub seed: u64,
}

/// A pending message-level generation call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MsgJob {
    pub prompt: String,
    pub seed: u64,
}

const STREAM_SUGGEST: u64 = 1;
const STREAM_IMPROVE: u64 = 2;
const STREAM_MSG: u64 = 3;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for the `n`th call on a stream. Multiples of 1000 leave room for the
/// per-slot offsets of a suggestion set.
pub fn derive_seed(session_seed: u64, stream: u64, n: u64) -> u64 {
    let x = splitmix64(session_seed ^ splitmix64((stream << 48) ^ n));
    (x % (u64::MAX / 1000)) * 1000
}

pub struct Session {
    state: SessionState,
    events: Vec<EventRecord>,
    clock: Box<dyn Clock>,
    options: GenerationOptions,
    flushed: usize,
    improve_in_flight: bool,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("state", &self.state)
            .field("events", &self.events.len())
            .finish()
    }
}

impl Session {
    /// Opens a session on the reading screen and logs the briefing display.
    pub fn start(
        email: &IncomingEmail,
        mode: UiMode,
        briefing_id: impl Into<String>,
        seed: u64,
        clock: Box<dyn Clock>,
    ) -> Session {
        let briefing_id = briefing_id.into();
        let record = EventRecord {
            seq: 0,
            t_ms: clock.now_ms(),
            event: Event::SessionStart {
                mode,
                email: EmailRecord {
                    id: email.id.clone(),
                    sender_name: email.sender_name.clone(),
                    subject: email.subject.clone(),
                    body: email.body.clone(),
                },
                briefing_id: briefing_id.clone(),
                seed,
            },
        };
        let state = SessionState::from_start(&record).expect("session_start record");
        let mut session = Session {
            state,
            events: vec![record],
            clock,
            options: GenerationOptions::default(),
            flushed: 0,
            improve_in_flight: false,
        };
        session
            .emit(Event::BriefingViewed { briefing_id })
            .expect("briefing_viewed applies");
        session
    }

    pub fn with_options(mut self, options: GenerationOptions) -> Self {
        self.options = options;
        self
    }

    pub fn options(&self) -> &GenerationOptions {
        &self.options
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn mode(&self) -> UiMode {
        self.state.mode
    }

    /// Events appended since the previous call.
    pub fn take_new_events(&mut self) -> Vec<EventRecord> {
        let new = self.events[self.flushed..].to_vec();
        self.flushed = self.events.len();
        new
    }

    fn emit(&mut self, event: Event) -> Result<(), SessionError> {
        let last = self.events.last().map_or(0, |r| r.t_ms);
        let record = EventRecord {
            seq: self.events.len() as u64,
            t_ms: self.clock.now_ms().max(last),
            event,
        };
        self.state
            .apply(&record)
            .map_err(|e| SessionError::Internal(e.to_string()))?;
        self.events.push(record);
        Ok(())
    }

    fn gate(&self, mode: Option<UiMode>, screen: Screen) -> Result<(), SessionError> {
        if self.state.sent {
            return Err(SessionError::SessionClosed);
        }
        if let Some(m) = mode {
            if self.state.mode != m {
                return Err(SessionError::WrongMode(self.state.mode));
            }
        }
        if self.state.screen != screen {
            return Err(SessionError::WrongScreen(self.state.screen));
        }
        Ok(())
    }

    fn open_widget_at(&self, anchor: usize) -> Result<&LocalResponse, SessionError> {
        self.state
            .widget(anchor)
            .filter(|w| w.is_open())
            .ok_or(SessionError::WidgetNotOpen(anchor))
    }

    /// Request descriptor for the open widget at `anchor`.
    pub fn suggestion_request(&self, anchor: usize) -> Result<SuggestionRequest, SessionError> {
        let w = self.open_widget_at(anchor)?;
        let input = w.text.trim();
        Ok(SuggestionRequest {
            anchor,
            token: w.staleness_token,
            existing_reply: self.state.assemble_except(Some(anchor)),
            user_input: (!input.is_empty()).then(|| input.to_owned()),
            seed: derive_seed(self.state.seed, STREAM_SUGGEST, w.staleness_token),
        })
    }

    /// Taps a sentence. Returns the suggestion request for the newly opened
    /// widget, or `None` when the tap closed it.
    pub fn select_sentence(
        &mut self,
        anchor: usize,
    ) -> Result<Option<SuggestionRequest>, SessionError> {
        self.gate(Some(UiMode::Cdlr), Screen::Reading)?;
        if anchor >= self.state.email.sentences.len() {
            return Err(SessionError::InvalidIndex(anchor));
        }
        let opened = !self
            .state
            .widget(anchor)
            .is_some_and(LocalResponse::is_open);
        self.emit(Event::SentenceSelected { anchor, opened })?;
        if opened {
            self.suggestion_request(anchor).map(Some)
        } else {
            Ok(None)
        }
    }

    /// Replaces the open widget's text. Returns a refreshed request when the
    /// text changed.
    pub fn set_widget_text(
        &mut self,
        anchor: usize,
        text: &str,
    ) -> Result<Option<SuggestionRequest>, SessionError> {
        self.gate(Some(UiMode::Cdlr), Screen::Reading)?;
        let w = self.open_widget_at(anchor)?;
        let Some(delta) = TextDelta::between(&w.text, text) else {
            return Ok(None);
        };
        self.emit(Event::WidgetTextChanged { anchor, delta })?;
        self.suggestion_request(anchor).map(Some)
    }

    /// Stores a generated set if it is still current. Stale sets are dropped
    /// without logging and `false` is returned.
    pub fn deliver_suggestions(
        &mut self,
        anchor: usize,
        set: SuggestionSet,
    ) -> Result<bool, SessionError> {
        if self.state.sent || self.state.screen != Screen::Reading {
            return Ok(false);
        }
        let current = self
            .state
            .widget(anchor)
            .is_some_and(|w| w.is_open() && w.staleness_token == set.token);
        if !current {
            return Ok(false);
        }
        self.emit(Event::SuggestionShown { anchor, set })?;
        Ok(true)
    }

    /// Generates and delivers suggestions for the open widget in one step.
    pub fn fetch_suggestions(
        &mut self,
        anchor: usize,
        client: &dyn LlmClient,
    ) -> Result<bool, SessionError> {
        self.gate(Some(UiMode::Cdlr), Screen::Reading)?;
        let request = self.suggestion_request(anchor)?;
        let set = run_suggestions(&self.state.email, &request, client, &self.options)?;
        self.deliver_suggestions(anchor, set)
    }

    pub fn change_page(&mut self, anchor: usize, page: usize) -> Result<(), SessionError> {
        self.gate(Some(UiMode::Cdlr), Screen::Reading)?;
        let w = self.open_widget_at(anchor)?;
        let set = w.current_set().ok_or(SessionError::StaleSuggestion)?;
        if page == 0 || page > set.pages.len() {
            return Err(SessionError::InvalidPage(page));
        }
        if page == w.page {
            return Ok(());
        }
        self.emit(Event::SuggestionPageChanged { anchor, page })
    }

    pub fn accept_suggestion(
        &mut self,
        anchor: usize,
        suggestion_id: &str,
    ) -> Result<(), SessionError> {
        self.gate(Some(UiMode::Cdlr), Screen::Reading)?;
        let set = self
            .state
            .widget(anchor)
            .filter(|w| w.is_open())
            .and_then(LocalResponse::current_set)
            .ok_or(SessionError::StaleSuggestion)?;
        let suggestion = set
            .get(suggestion_id)
            .ok_or_else(|| SessionError::UnknownSuggestion(suggestion_id.to_owned()))?;
        let event = Event::SuggestionAccepted {
            anchor,
            suggestion_id: suggestion.id.clone(),
            page: set.page_of(suggestion_id).unwrap_or(1),
            text: suggestion.text.clone(),
        };
        self.emit(event)
    }

    pub fn collapse_widget(&mut self, anchor: usize) -> Result<(), SessionError> {
        self.gate(Some(UiMode::Cdlr), Screen::Reading)?;
        let w = self
            .state
            .widget(anchor)
            .ok_or(SessionError::NoSuchWidget(anchor))?;
        if !w.is_open() {
            return Ok(());
        }
        self.emit(Event::WidgetCollapsed { anchor })
    }

    pub fn delete_widget(&mut self, anchor: usize) -> Result<(), SessionError> {
        self.gate(Some(UiMode::Cdlr), Screen::Reading)?;
        let w = self
            .state
            .widget(anchor)
            .ok_or(SessionError::NoSuchWidget(anchor))?;
        if !w.text.is_empty() {
            return Err(SessionError::NonEmptyDelete(anchor));
        }
        self.emit(Event::WidgetDeleted { anchor })
    }

    /// CDLR: moves to the draft screen with the assembled local responses.
    pub fn finalize(&mut self) -> Result<(), SessionError> {
        self.gate(Some(UiMode::Cdlr), Screen::Reading)?;
        let draft = self.state.assemble_draft();
        self.emit(Event::ScreenChanged {
            from: Screen::Reading,
            to: Screen::Draft,
            draft,
        })
    }

    /// Leaves the current screen for the next one in the mode's flow.
    pub fn proceed(&mut self) -> Result<(), SessionError> {
        if self.state.sent {
            return Err(SessionError::SessionClosed);
        }
        let to = match (self.state.mode, self.state.screen) {
            (UiMode::Cdlr, Screen::Reading) => return self.finalize(),
            (UiMode::NoAi, Screen::Reading) | (UiMode::Msg, Screen::MsgGenerate) => Screen::Draft,
            (UiMode::Msg, Screen::Reading) => Screen::MsgGenerate,
            (_, screen) => return Err(SessionError::WrongScreen(screen)),
        };
        let from = self.state.screen;
        let draft = self.state.draft.clone();
        self.emit(Event::ScreenChanged { from, to, draft })
    }

    pub fn edit_draft(&mut self, text: &str) -> Result<(), SessionError> {
        self.gate(None, Screen::Draft)?;
        if self.state.pending_proposal.is_some() || self.improve_in_flight {
            return Err(SessionError::ProposalPending);
        }
        match TextDelta::between(&self.state.draft, text) {
            Some(delta) => self.emit(Event::DraftEdited { delta }),
            None => Ok(()),
        }
    }

    /// Logs the improve request and returns the generation job. Pair with
    /// [`record_improvement`](Self::record_improvement).
    pub fn prepare_improvement(&mut self) -> Result<ImproveJob, SessionError> {
        self.gate(Some(UiMode::Cdlr), Screen::Draft)?;
        if self.state.pending_proposal.is_some() || self.improve_in_flight {
            return Err(SessionError::ProposalPending);
        }
        let draft = self.state.draft.clone();
        let seed = derive_seed(self.state.seed, STREAM_IMPROVE, self.state.improve_count);
        self.emit(Event::ImproveRequested {
            draft: draft.clone(),
        })?;
        self.improve_in_flight = true;
        Ok(ImproveJob { draft, seed })
    }

    pub fn record_improvement(
        &mut self,
        job: &ImproveJob,
        result: Result<String, SuggestionError>,
    ) -> Result<ImprovementProposal, SessionError> {
        self.improve_in_flight = false;
        let improved = result?;
        if self.state.sent {
            return Err(SessionError::SessionClosed);
        }
        if self.state.draft != job.draft || self.state.screen != Screen::Draft {
            return Err(SessionError::DraftChanged);
        }
        self.emit(Event::ProposalShown {
            base_draft: job.draft.clone(),
            improved_text: improved,
        })?;
        self.state
            .pending_proposal
            .clone()
            .ok_or_else(|| SessionError::Internal("proposal missing after apply".into()))
    }

    /// Runs one improvement pass synchronously.
    pub fn request_improvement(
        &mut self,
        client: &dyn LlmClient,
    ) -> Result<ImprovementProposal, SessionError> {
        let job = self.prepare_improvement()?;
        let result = run_improvement(&self.state.email, &job, client, &self.options);
        self.record_improvement(&job, result)
    }

    pub fn resolve_proposal(&mut self, decision: ProposalDecision) -> Result<(), SessionError> {
        self.gate(Some(UiMode::Cdlr), Screen::Draft)?;
        if self.state.pending_proposal.is_none() {
            return Err(SessionError::NoProposal);
        }
        self.emit(match decision {
            ProposalDecision::Accept => Event::ProposalAccepted {},
            ProposalDecision::Discard => Event::ProposalDiscarded {},
        })
    }

    pub fn msg_set_prompt(&mut self, text: &str) -> Result<(), SessionError> {
        self.gate(Some(UiMode::Msg), Screen::MsgGenerate)?;
        match TextDelta::between(&self.state.msg_prompt, text) {
            Some(delta) => self.emit(Event::MsgPromptChanged { delta }),
            None => Ok(()),
        }
    }

    pub fn prepare_msg_generation(&self) -> Result<MsgJob, SessionError> {
        self.gate(Some(UiMode::Msg), Screen::MsgGenerate)?;
        Ok(MsgJob {
            prompt: self.state.msg_prompt.clone(),
            seed: derive_seed(self.state.seed, STREAM_MSG, self.state.msg_generate_count),
        })
    }

    pub fn record_msg_generation(
        &mut self,
        job: &MsgJob,
        result: Result<String, SuggestionError>,
    ) -> Result<String, SessionError> {
        let text = result?;
        self.gate(Some(UiMode::Msg), Screen::MsgGenerate)?;
        self.emit(Event::MsgGenerated {
            prompt: job.prompt.clone(),
            text: text.clone(),
        })?;
        Ok(text)
    }

    /// Generates a full reply from the current prompt synchronously.
    pub fn msg_generate(&mut self, client: &dyn LlmClient) -> Result<String, SessionError> {
        let job = self.prepare_msg_generation()?;
        let result = run_msg_generation(&self.state.email, &job, client, &self.options);
        self.record_msg_generation(&job, result)
    }

    /// Accept moves the generated reply into the draft screen; discard keeps
    /// the prompt for refinement.
    pub fn msg_resolve(&mut self, decision: ProposalDecision) -> Result<(), SessionError> {
        self.gate(Some(UiMode::Msg), Screen::MsgGenerate)?;
        let text = self
            .state
            .msg_pending
            .clone()
            .ok_or(SessionError::NoMessage)?;
        match decision {
            ProposalDecision::Accept => {
                self.emit(Event::MsgAccepted { text: text.clone() })?;
                self.emit(Event::ScreenChanged {
                    from: Screen::MsgGenerate,
                    to: Screen::Draft,
                    draft: text,
                })
            }
            ProposalDecision::Discard => self.emit(Event::MsgDiscarded {}),
        }
    }

    pub fn send(&mut self) -> Result<String, SessionError> {
        self.gate(None, Screen::Draft)?;
        if self.state.pending_proposal.is_some() || self.improve_in_flight {
            return Err(SessionError::ProposalPending);
        }
        let text = self.state.draft.clone();
        self.emit(Event::EmailSent { text: text.clone() })?;
        Ok(text)
    }

    /// Logs a briefing access. Allowed at any point, including after sending.
    pub fn view_briefing(&mut self) -> Result<(), SessionError> {
        let briefing_id = self.state.briefing_id.clone();
        self.emit(Event::BriefingViewed { briefing_id })
    }

    /// Stores the post-task questionnaire.
    pub fn record_feedback(
        &mut self,
        ratings: Vec<LikertResponse>,
        comment: Option<&str>,
    ) -> Result<(), SessionError> {
        if !self.state.sent {
            return Err(SessionError::SessionNotSent);
        }
        if self.state.feedback_submitted {
            return Err(SessionError::FeedbackSubmitted);
        }
        let ratings = validate_likert(ratings)?;
        self.emit(Event::LikertSubmitted { ratings })?;
        if let Some(text) = comment {
            self.emit(Event::CommentSubmitted {
                text: text.to_owned(),
            })?;
        }
        Ok(())
    }
}

/// Runs suggestion generation for a request. Safe to call without holding
/// the session.
pub fn run_suggestions(
    email: &IncomingEmail,
    request: &SuggestionRequest,
    client: &dyn LlmClient,
    options: &GenerationOptions,
) -> Result<SuggestionSet, SuggestionError> {
    let span = &email.sentences[request.anchor];
    generate_local_suggestions(email, span, request, client, options)
}

pub fn run_improvement(
    email: &IncomingEmail,
    job: &ImproveJob,
    client: &dyn LlmClient,
    options: &GenerationOptions,
) -> Result<String, SuggestionError> {
    generate_improvement(email, &job.draft, client, job.seed, options)
}

pub fn run_msg_generation(
    email: &IncomingEmail,
    job: &MsgJob,
    client: &dyn LlmClient,
    options: &GenerationOptions,
) -> Result<String, SuggestionError> {
    generate_message_reply(email, &job.prompt, client, job.seed, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompting::{LlmError, MockClient};
    use crate::study::LikertItem;

    fn email() -> IncomingEmail {
        IncomingEmail::new(
            "e9_gift",
            "Hannah Brooks",
            "Farewell gift",
            "Hi Jamie,\n\nWe are collecting for a gift. Could you chip in? Which option do you \
             prefer?\n\nThanks,\nHannah",
        )
    }

    fn start(mode: UiMode) -> (Session, ManualClock) {
        let clock = ManualClock::new();
        let s = Session::start(&email(), mode, "b9", 42, Box::new(clock.clone()));
        (s, clock)
    }

    fn replayed(s: &Session) -> SessionState {
        SessionState::replay(s.events()).unwrap()
    }

    #[test]
    fn start_logs_briefing() {
        let (s, _) = start(UiMode::Cdlr);
        let kinds: Vec<_> = s.events().iter().map(|e| e.event.kind()).collect();
        assert_eq!(kinds, ["session_start", "briefing_viewed"]);
        assert_eq!(s.state().screen, Screen::Reading);
        assert!(s.state().local_responses.is_empty());
    }

    #[test]
    fn selecting_moves_the_open_widget() {
        let (mut s, _) = start(UiMode::Cdlr);
        s.select_sentence(0).unwrap().unwrap();
        s.select_sentence(2).unwrap().unwrap();
        assert_eq!(s.state().widget(0).unwrap().state, WidgetState::Collapsed);
        assert_eq!(s.state().widget(2).unwrap().state, WidgetState::Open);
        assert!(s.select_sentence(2).unwrap().is_none());
        assert_eq!(s.state().widget(2).unwrap().state, WidgetState::Collapsed);
        assert_eq!(s.select_sentence(99), Err(SessionError::InvalidIndex(99)));
    }

    #[test]
    fn mode_gates() {
        let (mut s, _) = start(UiMode::NoAi);
        assert_eq!(
            s.select_sentence(0),
            Err(SessionError::WrongMode(UiMode::NoAi))
        );
        s.proceed().unwrap();
        assert!(matches!(
            s.prepare_improvement(),
            Err(SessionError::WrongMode(UiMode::NoAi))
        ));
        s.edit_draft("Hi Hannah, count me in. Jamie").unwrap();
        s.send().unwrap();
        assert!(s.events().iter().all(|e| !e.event.is_ai()));
    }

    #[test]
    fn typing_issues_with_input_request() {
        let (mut s, _) = start(UiMode::Cdlr);
        let first = s.select_sentence(2).unwrap().unwrap();
        assert!(first.user_input.is_none());
        let req = s.set_widget_text(2, "balloon ride").unwrap().unwrap();
        assert_eq!(req.user_input.as_deref(), Some("balloon ride"));
        assert!(req.token > first.token);
        s.collapse_widget(2).unwrap();
        assert_eq!(
            s.set_widget_text(2, "x"),
            Err(SessionError::WidgetNotOpen(2))
        );
    }

    #[test]
    fn accepting_and_staleness() {
        let (mut s, _) = start(UiMode::Cdlr);
        let client = MockClient::new();
        let req = s.select_sentence(3).unwrap().unwrap();
        let set = run_suggestions(&s.state().email, &req, &client, s.options()).unwrap();
        assert!(s.deliver_suggestions(3, set.clone()).unwrap());
        let id = set.pages[0][0].clone();

        s.select_sentence(2).unwrap();
        assert_eq!(
            s.accept_suggestion(3, &id),
            Err(SessionError::StaleSuggestion)
        );
        // A late set for the closed widget is dropped.
        assert!(!s.deliver_suggestions(3, set.clone()).unwrap());

        s.select_sentence(3).unwrap();
        assert!(s.fetch_suggestions(3, &client).unwrap());
        let set = s.state().widget(3).unwrap().current_set().unwrap().clone();
        assert_eq!(
            s.accept_suggestion(3, "nope"),
            Err(SessionError::UnknownSuggestion("nope".into()))
        );
        let id = set.pages[0][0].clone();
        s.accept_suggestion(3, &id).unwrap();
        let w = s.state().widget(3).unwrap();
        assert_eq!(w.state, WidgetState::Collapsed);
        assert_eq!(w.origin, Origin::Suggestion);
        assert_eq!(w.text, set.get(&id).unwrap().text);
        match &s.events().last().unwrap().event {
            Event::SuggestionAccepted { page, .. } => assert_eq!(*page, 1),
            other => panic!("unexpected {other:?}"),
        }

        s.select_sentence(3).unwrap();
        s.set_widget_text(3, "Sure, happy to.").unwrap();
        assert_eq!(
            s.state().widget(3).unwrap().origin,
            Origin::SuggestionEdited
        );
    }

    #[test]
    fn delete_requires_empty_text() {
        let (mut s, _) = start(UiMode::Cdlr);
        s.select_sentence(1).unwrap();
        s.set_widget_text(1, "hi").unwrap();
        assert_eq!(s.delete_widget(1), Err(SessionError::NonEmptyDelete(1)));
        s.set_widget_text(1, "").unwrap();
        s.delete_widget(1).unwrap();
        assert!(s.state().widget(1).is_none());
        assert_eq!(s.delete_widget(1), Err(SessionError::NoSuchWidget(1)));
    }

    #[test]
    fn finalize_orders_by_anchor() {
        let (mut s, _) = start(UiMode::Cdlr);
        s.select_sentence(4).unwrap();
        s.set_widget_text(4, "No.").unwrap();
        s.select_sentence(1).unwrap();
        s.set_widget_text(1, "Yes!").unwrap();
        s.select_sentence(2).unwrap();
        s.finalize().unwrap();
        assert_eq!(s.state().draft, "Yes!\n\nNo.");
        assert_eq!(s.finalize(), Err(SessionError::WrongScreen(Screen::Draft)));
        assert_eq!(replayed(&s), *s.state());
    }

    #[test]
    fn finalize_with_nothing_gives_empty_draft() {
        let (mut s, _) = start(UiMode::Cdlr);
        s.finalize().unwrap();
        assert_eq!(s.state().draft, "");
    }

    #[test]
    fn improvement_cycle() {
        let (mut s, _) = start(UiMode::Cdlr);
        let client = MockClient::new();
        s.finalize().unwrap();
        s.edit_draft("count me in. i prefer the voucher").unwrap();
        let p = s.request_improvement(&client).unwrap();
        assert_eq!(p.base_draft, s.state().draft);
        assert_eq!(
            s.request_improvement(&client),
            Err(SessionError::ProposalPending)
        );
        assert_eq!(s.edit_draft("x"), Err(SessionError::ProposalPending));
        assert_eq!(s.send(), Err(SessionError::ProposalPending));
        s.resolve_proposal(ProposalDecision::Discard).unwrap();
        assert_eq!(s.state().draft, "count me in. i prefer the voucher");
        let p = s.request_improvement(&client).unwrap();
        s.resolve_proposal(ProposalDecision::Accept).unwrap();
        assert_eq!(s.state().draft, p.improved_text);
        assert_eq!(
            s.resolve_proposal(ProposalDecision::Accept),
            Err(SessionError::NoProposal)
        );
        s.request_improvement(&client).unwrap();
        assert_eq!(replayed(&s), *s.state());
    }

    #[test]
    fn failed_improvement_still_logs_the_request() {
        let (mut s, _) = start(UiMode::Cdlr);
        s.finalize().unwrap();
        let down = MockClient::failing(LlmError::EndpointUnavailable("down".into()));
        let err = s.request_improvement(&down).unwrap_err();
        assert_eq!(err.code(), "model_unavailable");
        assert_eq!(s.events().last().unwrap().event.kind(), "improve_requested");
        assert!(s.state().pending_proposal.is_none());
        s.request_improvement(&MockClient::new()).unwrap();
    }

    #[test]
    fn msg_flow() {
        let (mut s, _) = start(UiMode::Msg);
        let client = MockClient::new();
        s.proceed().unwrap();
        assert_eq!(s.state().screen, Screen::MsgGenerate);
        s.msg_set_prompt("decline politely").unwrap();
        assert_eq!(
            s.msg_resolve(ProposalDecision::Accept),
            Err(SessionError::NoMessage)
        );
        s.msg_generate(&client).unwrap();
        s.msg_resolve(ProposalDecision::Discard).unwrap();
        assert_eq!(s.state().msg_prompt, "decline politely");
        assert_eq!(s.state().screen, Screen::MsgGenerate);
        let text = s.msg_generate(&client).unwrap();
        s.msg_resolve(ProposalDecision::Accept).unwrap();
        assert_eq!(s.state().screen, Screen::Draft);
        assert_eq!(s.state().draft, text);
        s.send().unwrap();
        assert_eq!(replayed(&s), *s.state());
    }

    #[test]
    fn send_closes_the_session() {
        let (mut s, clock) = start(UiMode::Cdlr);
        s.finalize().unwrap();
        clock.advance(5_000);
        s.send().unwrap();
        assert_eq!(s.send(), Err(SessionError::SessionClosed));
        assert_eq!(s.edit_draft("late"), Err(SessionError::SessionClosed));
        assert_eq!(s.select_sentence(0), Err(SessionError::SessionClosed));
        assert_eq!(s.events().last().unwrap().t_ms, 5_000);
    }

    #[test]
    fn feedback_requires_sent_and_four_items() {
        let (mut s, _) = start(UiMode::NoAi);
        let all: Vec<_> = LikertItem::ALL
            .iter()
            .map(|&item| LikertResponse { item, rating: 4 })
            .collect();
        assert_eq!(
            s.record_feedback(all.clone(), None),
            Err(SessionError::SessionNotSent)
        );
        s.proceed().unwrap();
        s.send().unwrap();
        assert_eq!(
            s.record_feedback(all[..3].to_vec(), None)
                .unwrap_err()
                .code(),
            "incomplete_likert"
        );
        s.record_feedback(all.clone(), Some("fine")).unwrap();
        let kinds: Vec<_> = s
            .events()
            .iter()
            .rev()
            .take(2)
            .map(|e| e.event.kind())
            .collect();
        assert_eq!(kinds, ["comment_submitted", "likert_submitted"]);
        assert_eq!(
            s.record_feedback(all, None),
            Err(SessionError::FeedbackSubmitted)
        );
    }

    #[test]
    fn timestamps_never_go_backwards() {
        let (mut s, clock) = start(UiMode::NoAi);
        clock.set(1_000);
        s.view_briefing().unwrap();
        clock.set(500);
        s.proceed().unwrap();
        let t: Vec<_> = s.events().iter().map(|e| e.t_ms).collect();
        assert_eq!(t, [0, 0, 1_000, 1_000]);
    }

    #[test]
    fn seeds_are_spread_and_slot_safe() {
        let a = derive_seed(1, STREAM_SUGGEST, 1);
        let b = derive_seed(1, STREAM_SUGGEST, 2);
        assert_ne!(a, b);
        assert_eq!(a % 1000, 0);
        assert_eq!(a, derive_seed(1, STREAM_SUGGEST, 1));
    }
}
