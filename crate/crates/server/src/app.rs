use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::path::PathBuf;
use std::sync::{Arc, Mutex as StdMutex};
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cdlr_core::session::{run_improvement, run_msg_generation, run_suggestions, JsonlWriter};
use cdlr_core::study::{build_plan_for, TASKS_PER_PARTICIPANT};
use cdlr_core::trackdiff::AnnotatedSegment;
use cdlr_core::{
    session_seed, CorpusEntry, GenerationOptions, LikertResponse, LlmClient, ProposalDecision,
    Session, SessionError, SessionState, StudyPlan, SuggestionRequest, SuggestionSet, SystemClock,
    UiMode,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{Mutex, Notify};

use crate::config::Config;

/// Error body: a stable code and a human-readable message.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            code: code.to_owned(),
            message: message.into(),
        }
    }

    fn not_found(what: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("unknown {what}"),
        )
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

/// HTTP status for a session error.
pub fn status_of(err: &SessionError) -> StatusCode {
    use SessionError::*;
    match err {
        WrongMode(_) | InvalidIndex(_) | InvalidPage(_) | UnknownSuggestion(_) | Feedback(_) => {
            StatusCode::BAD_REQUEST
        }
        SessionClosed | WrongScreen(_) | WidgetNotOpen(_) | NoSuchWidget(_) | NonEmptyDelete(_)
        | StaleSuggestion | ProposalPending | NoProposal | DraftChanged | NoMessage
        | SessionNotSent | FeedbackSubmitted => StatusCode::CONFLICT,
        Generation(cdlr_core::SuggestionError::Prompt(_)) => StatusCode::BAD_REQUEST,
        Generation(_) => StatusCode::SERVICE_UNAVAILABLE,
        Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        Self::new(status_of(&e), e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Json(json!({"code": self.code, "message": self.message}));
        (self.status, body).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

struct Live {
    session: Session,
    writer: JsonlWriter<File>,
    /// Last generation failure per anchor, keyed by the token it was for.
    failures: HashMap<usize, (u64, String, String)>,
}

impl Live {
    /// Appends events produced since the last flush to the log file.
    fn flush(&mut self) -> Result<(), ApiError> {
        for record in self.session.take_new_events() {
            self.writer
                .write_event(&record)
                .map_err(|e| ApiError::internal(format!("log write failed: {e}")))?;
        }
        Ok(())
    }
}

struct SessionSlot {
    id: String,
    participant: String,
    task_index: usize,
    live: Mutex<Live>,
    /// Woken whenever a suggestion set lands or a generation fails.
    changed: Notify,
}

struct Participant {
    index: u64,
    plan: StudyPlan,
    cursor: usize,
    session_id: Option<String>,
}

struct Inner {
    config: Config,
    corpus: Vec<CorpusEntry>,
    email_ids: [String; TASKS_PER_PARTICIPANT],
    client: Arc<dyn LlmClient>,
    options: GenerationOptions,
    participants: StdMutex<HashMap<String, Participant>>,
    sessions: StdMutex<HashMap<String, Arc<SessionSlot>>>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error("corpus must hold exactly {TASKS_PER_PARTICIPANT} emails for study plans")]
    CorpusSize,
    #[error("cannot create log directory: {0}")]
    LogDir(std::io::Error),
}

impl AppState {
    pub fn new(
        config: Config,
        corpus: Vec<CorpusEntry>,
        client: Arc<dyn LlmClient>,
    ) -> Result<AppState, StartupError> {
        let email_ids = crate::corpus::plan_ids(&corpus).ok_or(StartupError::CorpusSize)?;
        std::fs::create_dir_all(&config.log_dir).map_err(StartupError::LogDir)?;
        let options = GenerationOptions {
            sampling: config.llm.sampling,
            ..GenerationOptions::default()
        };
        Ok(AppState(Arc::new(Inner {
            config,
            corpus,
            email_ids,
            client,
            options,
            participants: StdMutex::new(HashMap::new()),
            sessions: StdMutex::new(HashMap::new()),
        })))
    }

    pub fn config(&self) -> &Config {
        &self.0.config
    }

    fn slot(&self, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        self.0
            .sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session"))
    }

    fn entry(&self, email_id: &str) -> &CorpusEntry {
        self.0
            .corpus
            .iter()
            .find(|e| e.id == email_id)
            .expect("plan ids come from the corpus")
    }

    fn log_path(&self, participant: u64, task: usize, mode: UiMode) -> PathBuf {
        self.0
            .config
            .log_dir
            .join(format!("p{participant}_t{task}_{mode}.jsonl"))
    }

    /// Starts the session for the participant's current task unless one is
    /// already running.
    fn ensure_session(&self, token: &str) -> Result<Option<String>, ApiError> {
        let mut participants = self.0.participants.lock().unwrap();
        let p = participants
            .get_mut(token)
            .ok_or_else(|| ApiError::not_found("participant"))?;
        if let Some(id) = &p.session_id {
            return Ok(Some(id.clone()));
        }
        let Ok(task) = p.plan.task(p.cursor) else {
            return Ok(None);
        };
        let entry = self.entry(&task.email_id);
        let path = self.log_path(p.index, p.cursor, task.mode);
        let file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| {
                if e.kind() == std::io::ErrorKind::AlreadyExists {
                    ApiError::new(
                        StatusCode::CONFLICT,
                        "log_exists",
                        format!("{} already exists", path.display()),
                    )
                } else {
                    ApiError::internal(format!("cannot create {}: {e}", path.display()))
                }
            })?;
        let mut writer = JsonlWriter::new(file);
        let header = cdlr_core::session::LogHeader {
            participant: p.index,
            task_index: p.cursor,
            mode: task.mode,
            email_id: task.email_id.clone(),
        };
        writer
            .write_header(&header)
            .map_err(|e| ApiError::internal(e.to_string()))?;
        let session = Session::start(
            &entry.email(),
            task.mode,
            entry.briefing_id(),
            session_seed(p.index, p.cursor),
            Box::new(SystemClock::new()),
        )
        .with_options(self.0.options);
        let mut live = Live {
            session,
            writer,
            failures: HashMap::new(),
        };
        live.flush()?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let slot = SessionSlot {
            id: id.clone(),
            participant: token.to_owned(),
            task_index: p.cursor,
            live: Mutex::new(live),
            changed: Notify::new(),
        };
        self.0
            .sessions
            .lock()
            .unwrap()
            .insert(id.clone(), Arc::new(slot));
        p.session_id = Some(id.clone());
        Ok(Some(id))
    }

    async fn task_view(&self, token: &str) -> Result<TaskView, ApiError> {
        let session_id = self.ensure_session(token)?;
        let (index, cursor, plan_len) = {
            let participants = self.0.participants.lock().unwrap();
            let p = &participants[token];
            (p.index, p.cursor, p.plan.tasks.len())
        };
        let Some(session_id) = session_id else {
            return Ok(TaskView {
                participant_index: index,
                task_index: cursor,
                tasks_total: plan_len,
                done: true,
                current: None,
            });
        };
        let slot = self.slot(&session_id)?;
        let live = slot.live.lock().await;
        let state = live.session.state();
        let entry = self.entry(&state.email.id);
        Ok(TaskView {
            participant_index: index,
            task_index: cursor,
            tasks_total: plan_len,
            done: false,
            current: Some(CurrentTask {
                session_id,
                mode: state.mode,
                email: EmailView {
                    id: entry.id.clone(),
                    sender_name: entry.sender_name.clone(),
                    subject: entry.subject.clone(),
                    body: entry.body.clone(),
                    sentences: state
                        .email
                        .sentences
                        .iter()
                        .map(|s| SentenceView {
                            index: s.index,
                            start: s.start,
                            end: s.end,
                            text: s.text.clone(),
                        })
                        .collect(),
                },
                briefing: entry.briefing_text.clone(),
            }),
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SentenceView {
    pub index: usize,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EmailView {
    pub id: String,
    pub sender_name: String,
    pub subject: String,
    pub body: String,
    pub sentences: Vec<SentenceView>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CurrentTask {
    pub session_id: String,
    pub mode: UiMode,
    pub email: EmailView,
    pub briefing: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TaskView {
    pub participant_index: u64,
    pub task_index: usize,
    pub tasks_total: usize,
    pub done: bool,
    pub current: Option<CurrentTask>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ParticipantCreated {
    pub participant_token: String,
    pub plan: StudyPlan,
    pub task: TaskView,
}

/// Snapshot returned by every session mutation.
#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub task_index: usize,
    pub state: SessionState,
    /// Track-changes rendering of a pending improvement.
    pub proposal_segments: Option<Vec<AnnotatedSegment>>,
    /// Suggestion debounce the client should apply to widget typing.
    pub debounce_ms: u64,
}

fn view(app: &AppState, slot: &SessionSlot, live: &Live) -> SessionView {
    let state = live.session.state().clone();
    let proposal_segments = state.pending_proposal.as_ref().map(|p| p.annotations());
    SessionView {
        session_id: slot.id.clone(),
        task_index: slot.task_index,
        state,
        proposal_segments,
        debounce_ms: app.0.config.debounce.as_millis() as u64,
    }
}

#[derive(Deserialize)]
struct NewParticipant {
    participant_index: u64,
}

async fn create_participant(
    State(app): State<AppState>,
    Json(body): Json<NewParticipant>,
) -> Result<(StatusCode, Json<ParticipantCreated>), ApiError> {
    let plan = build_plan_for(body.participant_index, &app.0.email_ids);
    let token = uuid::Uuid::new_v4().simple().to_string();
    {
        let mut participants = app.0.participants.lock().unwrap();
        if participants
            .values()
            .any(|p| p.index == body.participant_index)
        {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "participant_exists",
                format!("participant {} already registered", body.participant_index),
            ));
        }
        participants.insert(
            token.clone(),
            Participant {
                index: body.participant_index,
                plan: plan.clone(),
                cursor: 0,
                session_id: None,
            },
        );
    }
    let task = app.task_view(&token).await?;
    Ok((
        StatusCode::CREATED,
        Json(ParticipantCreated {
            participant_token: token,
            plan,
            task,
        }),
    ))
}

#[derive(Deserialize)]
struct ParticipantQuery {
    participant: String,
}

async fn current_task(
    State(app): State<AppState>,
    Query(q): Query<ParticipantQuery>,
) -> ApiResult<TaskView> {
    app.task_view(&q.participant).await.map(Json)
}

async fn get_session(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<SessionView> {
    let slot = app.slot(&id)?;
    let live = slot.live.lock().await;
    Ok(Json(view(&app, &slot, &live)))
}

/// Runs a synchronous session operation under the lock and persists its
/// events.
async fn mutate<T>(
    app: &AppState,
    id: &str,
    op: impl FnOnce(&mut Session) -> Result<T, SessionError>,
) -> Result<(Arc<SessionSlot>, T, SessionView), ApiError> {
    let slot = app.slot(id)?;
    let mut live = slot.live.lock().await;
    let result = op(&mut live.session);
    live.flush()?;
    let out = result?;
    let v = view(app, &slot, &live);
    drop(live);
    Ok((slot, out, v))
}

/// Generates a suggestion set off the request path and delivers it if the
/// widget still wants it.
fn spawn_generation(app: &AppState, slot: Arc<SessionSlot>, request: SuggestionRequest) {
    let app = app.clone();
    tokio::spawn(async move {
        let (email, options) = {
            let live = slot.live.lock().await;
            (live.session.state().email.clone(), *live.session.options())
        };
        let client = app.0.client.clone();
        let req = request.clone();
        let result = tokio::task::spawn_blocking(move || {
            run_suggestions(&email, &req, client.as_ref(), &options)
        })
        .await;
        let mut live = slot.live.lock().await;
        match result {
            Ok(Ok(set)) => match live.session.deliver_suggestions(request.anchor, set) {
                Ok(_) => {
                    if let Err(e) = live.flush() {
                        tracing::error!(session = %slot.id, "{}", e.message);
                    }
                }
                Err(e) => tracing::error!(session = %slot.id, error = %e, "delivery failed"),
            },
            Ok(Err(e)) => {
                let err = SessionError::from(e);
                tracing::warn!(session = %slot.id, error = %err, "suggestion generation failed");
                live.failures.insert(
                    request.anchor,
                    (request.token, err.code().to_owned(), err.to_string()),
                );
            }
            Err(join) => {
                live.failures.insert(
                    request.anchor,
                    (request.token, "internal".into(), join.to_string()),
                );
            }
        }
        drop(live);
        slot.changed.notify_waiters();
    });
}

#[derive(Deserialize)]
struct AnchorBody {
    anchor: usize,
}

#[derive(Deserialize)]
struct TextBody {
    text: String,
}

#[derive(Deserialize)]
struct WidgetTextBody {
    anchor: usize,
    text: String,
}

#[derive(Deserialize)]
struct AcceptBody {
    anchor: usize,
    suggestion_id: String,
}

#[derive(Deserialize)]
struct PageBody {
    anchor: usize,
    page: usize,
}

#[derive(Deserialize)]
struct DecisionBody {
    decision: ProposalDecision,
}

#[derive(Deserialize)]
struct FeedbackBody {
    ratings: Vec<LikertResponse>,
    comment: Option<String>,
}

async fn select(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(b): Json<AnchorBody>,
) -> ApiResult<SessionView> {
    let (slot, request, v) = mutate(&app, &id, |s| s.select_sentence(b.anchor)).await?;
    if let Some(request) = request {
        spawn_generation(&app, slot, request);
    }
    Ok(Json(v))
}

async fn widget_text(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(b): Json<WidgetTextBody>,
) -> ApiResult<SessionView> {
    let (slot, request, v) = mutate(&app, &id, |s| s.set_widget_text(b.anchor, &b.text)).await?;
    if let Some(request) = request {
        spawn_generation(&app, slot, request);
    }
    Ok(Json(v))
}

macro_rules! simple_op {
    ($name:ident, $body:ty, |$s:ident, $b:ident| $op:expr) => {
        async fn $name(
            State(app): State<AppState>,
            Path(id): Path<String>,
            Json($b): Json<$body>,
        ) -> ApiResult<SessionView> {
            let (_, _, v) = mutate(&app, &id, |$s| $op).await?;
            Ok(Json(v))
        }
    };
    ($name:ident, |$s:ident| $op:expr) => {
        async fn $name(
            State(app): State<AppState>,
            Path(id): Path<String>,
        ) -> ApiResult<SessionView> {
            let (_, _, v) = mutate(&app, &id, |$s| $op).await?;
            Ok(Json(v))
        }
    };
}

simple_op!(accept_suggestion, AcceptBody, |s, b| s
    .accept_suggestion(b.anchor, &b.suggestion_id));
simple_op!(change_page, PageBody, |s, b| s
    .change_page(b.anchor, b.page));
simple_op!(collapse, AnchorBody, |s, b| s.collapse_widget(b.anchor));
simple_op!(delete, AnchorBody, |s, b| s.delete_widget(b.anchor));
simple_op!(edit_draft, TextBody, |s, b| s.edit_draft(&b.text));
simple_op!(resolve_proposal, DecisionBody, |s, b| s
    .resolve_proposal(b.decision));
simple_op!(msg_prompt, TextBody, |s, b| s.msg_set_prompt(&b.text));
simple_op!(msg_resolve, DecisionBody, |s, b| s.msg_resolve(b.decision));
simple_op!(finalize, |s| s.finalize());
simple_op!(proceed, |s| s.proceed());
simple_op!(send, |s| s.send());

async fn improve(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<SessionView> {
    let (slot, job, _) = mutate(&app, &id, |s| s.prepare_improvement()).await?;
    let email = slot.live.lock().await.session.state().email.clone();
    let client = app.0.client.clone();
    let options = app.0.options;
    let j = job.clone();
    let result =
        tokio::task::spawn_blocking(move || run_improvement(&email, &j, client.as_ref(), &options))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?;
    let mut live = slot.live.lock().await;
    let outcome = live.session.record_improvement(&job, result);
    live.flush()?;
    outcome?;
    Ok(Json(view(&app, &slot, &live)))
}

async fn msg_generate(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<SessionView> {
    let (slot, job, _) = mutate(&app, &id, |s| s.prepare_msg_generation()).await?;
    let email = slot.live.lock().await.session.state().email.clone();
    let client = app.0.client.clone();
    let options = app.0.options;
    let j = job.clone();
    let result = tokio::task::spawn_blocking(move || {
        run_msg_generation(&email, &j, client.as_ref(), &options)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?;
    let mut live = slot.live.lock().await;
    let outcome = live.session.record_msg_generation(&job, result);
    live.flush()?;
    outcome?;
    Ok(Json(view(&app, &slot, &live)))
}

async fn feedback(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(b): Json<FeedbackBody>,
) -> ApiResult<SessionView> {
    let (slot, _, v) = mutate(&app, &id, |s| {
        s.record_feedback(b.ratings, b.comment.as_deref())
    })
    .await?;
    let mut participants = app.0.participants.lock().unwrap();
    if let Some(p) = participants.get_mut(&slot.participant) {
        if p.session_id.as_deref() == Some(slot.id.as_str()) {
            p.cursor += 1;
            p.session_id = None;
        }
    }
    Ok(Json(v))
}

async fn briefing(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Value> {
    let (_, _, v) = mutate(&app, &id, |s| s.view_briefing()).await?;
    let entry = app.entry(&v.state.email.id);
    Ok(Json(json!({
        "briefing_id": entry.briefing_id(),
        "briefing": entry.briefing_text,
    })))
}

#[derive(Deserialize)]
struct PollQuery {
    anchor: usize,
    wait_ms: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PollStatus {
    /// The current set is attached.
    Ready,
    /// Generation for the current token is still running.
    Pending,
    /// The widget is not open, so no set will arrive.
    Closed,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PollResponse {
    pub status: PollStatus,
    pub anchor: usize,
    pub staleness_token: Option<u64>,
    pub page: Option<usize>,
    pub set: Option<SuggestionSet>,
}

/// Long-polls for the open widget's current suggestion set.
async fn poll_suggestions(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<PollQuery>,
) -> ApiResult<PollResponse> {
    let slot = app.slot(&id)?;
    let wait = q
        .wait_ms
        .map(Duration::from_millis)
        .unwrap_or(app.0.config.poll_wait)
        .min(Duration::from_secs(60));
    let deadline = tokio::time::Instant::now() + wait;
    loop {
        let notified = slot.changed.notified();
        tokio::pin!(notified);
        notified.as_mut().enable();
        {
            let live = slot.live.lock().await;
            let widget = live
                .session
                .state()
                .widget(q.anchor)
                .filter(|w| w.is_open());
            let Some(w) = widget else {
                return Ok(Json(PollResponse {
                    status: PollStatus::Closed,
                    anchor: q.anchor,
                    staleness_token: None,
                    page: None,
                    set: None,
                }));
            };
            if let Some(set) = w.current_set() {
                return Ok(Json(PollResponse {
                    status: PollStatus::Ready,
                    anchor: q.anchor,
                    staleness_token: Some(w.staleness_token),
                    page: Some(w.page),
                    set: Some(set.clone()),
                }));
            }
            if let Some((token, code, message)) = live.failures.get(&q.anchor) {
                if *token == w.staleness_token {
                    return Err(ApiError::new(
                        StatusCode::SERVICE_UNAVAILABLE,
                        code,
                        message.clone(),
                    ));
                }
            }
            if tokio::time::Instant::now() >= deadline {
                return Ok(Json(PollResponse {
                    status: PollStatus::Pending,
                    anchor: q.anchor,
                    staleness_token: Some(w.staleness_token),
                    page: None,
                    set: None,
                }));
            }
        }
        let _ = tokio::time::timeout_at(deadline, notified).await;
    }
}

async fn health() -> Json<Value> {
    Json(json!({"status": "ok"}))
}

pub fn router(app: AppState) -> Router {
    let routes = Router::new()
        .route("/health", get(health))
        .route("/participants", post(create_participant))
        .route("/tasks/current", get(current_task))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/briefing", get(briefing))
        .route("/sessions/{id}/suggestions", get(poll_suggestions))
        .route("/sessions/{id}/select", post(select))
        .route("/sessions/{id}/widget-text", post(widget_text))
        .route("/sessions/{id}/accept-suggestion", post(accept_suggestion))
        .route("/sessions/{id}/page", post(change_page))
        .route("/sessions/{id}/collapse", post(collapse))
        .route("/sessions/{id}/delete", post(delete))
        .route("/sessions/{id}/finalize", post(finalize))
        .route("/sessions/{id}/proceed", post(proceed))
        .route("/sessions/{id}/improve", post(improve))
        .route("/sessions/{id}/proposal", post(resolve_proposal))
        .route("/sessions/{id}/draft", post(edit_draft))
        .route("/sessions/{id}/msg-prompt", post(msg_prompt))
        .route("/sessions/{id}/msg-generate", post(msg_generate))
        .route("/sessions/{id}/msg-resolve", post(msg_resolve))
        .route("/sessions/{id}/send", post(send))
        .route("/sessions/{id}/feedback", post(feedback));
    let routes = match &app.0.config.static_dir {
        Some(dir) => routes.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => routes,
    };
    routes.with_state(app)
}
