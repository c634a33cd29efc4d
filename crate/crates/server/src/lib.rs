//! HTTP front end for reply sessions: corpus loading, model clients, the
//! JSON API and per-task session logs.

pub mod adapters;
pub mod app;
pub mod config;
pub mod corpus;
pub mod driver;
pub mod remote;

use std::net::SocketAddr;
use std::sync::Arc;

use cdlr_core::{LlmClient, MockClient};

pub use app::{
    router, status_of, ApiError, AppState, PollResponse, PollStatus, SessionView, TaskView,
};
pub use config::{Config, ConfigError, LlmSettings};
pub use corpus::{load_corpus, CorpusError};
pub use remote::RemoteClient;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Startup(#[from] app::StartupError),
    #[error("MOCK_MODE is off but LLM_ENDPOINT is not set")]
    NoEndpoint,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The mock unless the settings name a live endpoint. A mock client never
/// touches the network.
pub fn build_client(settings: &LlmSettings) -> Result<Arc<dyn LlmClient>, ServeError> {
    if settings.mock {
        return Ok(Arc::new(MockClient::new()));
    }
    let endpoint = settings.endpoint.as_deref().ok_or(ServeError::NoEndpoint)?;
    Ok(Arc::new(RemoteClient::new(endpoint, settings)))
}

impl AppState {
    pub fn from_config(config: Config) -> Result<AppState, ServeError> {
        let corpus = load_corpus(&config.corpus_path, config.strict_corpus)?;
        let client = build_client(&config.llm)?;
        Ok(AppState::new(config, corpus, client)?)
    }
}

/// Serves until ctrl-c.
pub async fn serve(app: AppState) -> Result<(), ServeError> {
    let addr = SocketAddr::from(([0, 0, 0, 0], app.config().port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

/// A server on its own runtime thread, bound to an ephemeral localhost port.
/// Dropping it shuts the server down.
pub struct BackgroundServer {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl BackgroundServer {
    pub fn start(app: AppState) -> std::io::Result<BackgroundServer> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
        let addr = listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            runtime.block_on(async move {
                let _ = axum::serve(listener, router(app))
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await;
            });
        });
        Ok(BackgroundServer {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
