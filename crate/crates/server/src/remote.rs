//! Chat-completion client for a remote model endpoint.

use std::time::{Duration, Instant};

use cdlr_core::{LlmClient, LlmError, LlmRequest, LlmResponse};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::config::LlmSettings;

/// Appends the chat-completions path unless the endpoint already names it.
pub fn chat_url(endpoint: &str) -> String {
    let base = endpoint.trim_end_matches('/');
    if base.ends_with("/chat/completions") {
        base.to_owned()
    } else {
        format!("{base}/chat/completions")
    }
}

/// Sibling `/embeddings` URL of a configured chat endpoint.
pub fn embeddings_url(endpoint: &str) -> String {
    let base = endpoint.trim_end_matches('/');
    let base = base.strip_suffix("/chat/completions").unwrap_or(base);
    format!("{base}/embeddings")
}

#[derive(Debug, Clone)]
pub struct RemoteClient {
    url: String,
    model: String,
    api_key: Option<String>,
    timeout: Duration,
    retries: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

impl RemoteClient {
    pub fn new(endpoint: &str, settings: &LlmSettings) -> Self {
        Self {
            url: chat_url(endpoint),
            model: settings.model.clone(),
            api_key: settings.api_key.clone(),
            timeout: settings.timeout,
            retries: settings.retries,
        }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// Request body: system message, few-shot pairs, then the user turn.
    pub fn body(&self, request: &LlmRequest) -> Value {
        let p = &request.prompt;
        let mut messages = vec![json!({"role": "system", "content": p.system})];
        for ex in &p.examples {
            messages.push(json!({"role": "user", "content": ex.user}));
            messages.push(json!({"role": "assistant", "content": ex.assistant}));
        }
        messages.push(json!({"role": "user", "content": p.user}));
        json!({
            "model": self.model,
            "messages": messages,
            "temperature": request.sampling.temperature,
            "max_tokens": request.sampling.max_tokens,
            "seed": request.seed,
        })
    }

    fn attempt(&self, http: &reqwest::blocking::Client, body: &Value) -> Result<String, LlmError> {
        let mut req = http.post(&self.url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| self.transport_error(e))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(LlmError::EndpointUnavailable(format!("HTTP {status}")));
        }
        let parsed: ChatResponse = resp
            .json()
            .map_err(|e| LlmError::MalformedResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .map(|t| t.trim().to_owned())
            .filter(|t| !t.is_empty())
            .ok_or_else(|| LlmError::MalformedResponse("no completion text".into()))
    }

    fn transport_error(&self, e: reqwest::Error) -> LlmError {
        if e.is_timeout() {
            LlmError::Timeout(self.timeout.as_millis() as u64)
        } else if e.is_decode() {
            LlmError::MalformedResponse(e.to_string())
        } else {
            LlmError::EndpointUnavailable(e.to_string())
        }
    }
}

impl LlmClient for RemoteClient {
    /// Blocking. Tries once plus the retry budget and returns the last error.
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let started = Instant::now();
        let http = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| LlmError::EndpointUnavailable(e.to_string()))?;
        let body = self.body(request);
        let mut last = None;
        for attempt in 0..=self.retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(50 * u64::from(attempt)));
            }
            match self.attempt(&http, &body) {
                Ok(text) => {
                    return Ok(LlmResponse {
                        text,
                        latency_ms: started.elapsed().as_millis() as u64,
                        client: format!("remote/{}", self.model),
                    })
                }
                Err(e) => {
                    tracing::warn!(attempt, error = %e, "model call failed");
                    last = Some(e);
                }
            }
        }
        Err(last.expect("at least one attempt"))
    }
}
