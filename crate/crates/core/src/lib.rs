//! Sentence-anchored email reply composition.
//!
//! The crate covers the whole pipeline: segmenting an incoming email into
//! tappable sentences, generating per-sentence suggestions and whole-message
//! replies through a pluggable model client, the reply session state machine
//! with its append-only event log, study planning, and the analytics that
//! replay session logs into interaction and text metrics.

pub mod analytics;
pub mod prompting;
pub mod segmenter;
pub mod session;
pub mod sim;
pub mod study;
pub mod suggestions;
pub mod text;
pub mod trackdiff;

pub use prompting::{
    render_prompt, Attribute, LlmClient, LlmError, LlmRequest, LlmResponse, MockClient,
    PromptError, PromptVariables, RenderedPrompt, SamplingConfig, TemplateId,
};
pub use segmenter::{reconstruct, segment_email, IncomingEmail, SentenceSpan};
pub use session::{
    read_log, Clock, Event, EventRecord, JsonlWriter, LocalResponse, LogHeader, ManualClock,
    ProposalDecision, Screen, Session, SessionError, SessionLog, SessionState, SystemClock, UiMode,
};
pub use study::{
    build_plan, session_seed, CorpusEntry, LikertItem, LikertResponse, StudyPlan, TaskAssignment,
};
pub use suggestions::{
    generate_improvement, generate_local_suggestions, generate_message_reply, GenerationOptions,
    Suggestion, SuggestionAttribute, SuggestionError, SuggestionRequest, SuggestionSet,
    SuggestionSource,
};
pub use trackdiff::{
    apply_diff, render_annotations, word_diff, AnnotatedSegment, DiffError, DiffOp,
    ImprovementProposal, Mark,
};
