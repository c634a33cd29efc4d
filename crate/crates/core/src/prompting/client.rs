use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{PromptVariables, RenderedPrompt};

/// Sampling knobs forwarded to the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            temperature: 0.7,
            max_tokens: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub prompt: RenderedPrompt,
    /// The variables the prompt was rendered from; remote clients ignore them.
    pub vars: PromptVariables,
    pub seed: u64,
    pub sampling: SamplingConfig,
}

impl LlmRequest {
    pub fn new(prompt: RenderedPrompt, vars: PromptVariables, seed: u64) -> Self {
        Self {
            prompt,
            vars,
            seed,
            sampling: SamplingConfig::default(),
        }
    }

    /// Stable serialization used for hashing and capture.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("request serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
    pub latency_ms: u64,
    pub client: String,
}

/// Every variant is retryable; callers decide whether to retry.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("model request timed out after {0} ms")]
    Timeout(u64),
    #[error("model endpoint unavailable: {0}")]
    EndpointUnavailable(String),
    #[error("malformed model response: {0}")]
    MalformedResponse(String),
}

impl LlmError {
    pub fn code(&self) -> &'static str {
        match self {
            LlmError::Timeout(_) => "Timeout",
            LlmError::EndpointUnavailable(_) => "EndpointUnavailable",
            LlmError::MalformedResponse(_) => "MalformedResponse",
        }
    }
}

/// A chat-completion backend. Implementations must be shareable across threads.
pub trait LlmClient: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError>;
}

impl<T: LlmClient + ?Sized> LlmClient for &T {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        (**self).complete(request)
    }
}

impl<T: LlmClient + ?Sized> LlmClient for std::sync::Arc<T> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        (**self).complete(request)
    }
}

impl<T: LlmClient + ?Sized> LlmClient for Box<T> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        (**self).complete(request)
    }
}
