//! HTTP-backed implementations of the analytics plug points.

use std::time::Duration;

use cdlr_core::analytics::{Checker, CheckerError, Dialect, Embedder, SimilarityError};
use serde::Deserialize;
use serde_json::json;

/// A LanguageTool-compatible `/v2/check` endpoint. Every reported match
/// counts as one error.
#[derive(Debug, Clone)]
pub struct LanguageToolChecker {
    url: String,
    timeout: Duration,
}

#[derive(Deserialize)]
struct CheckResponse {
    matches: Vec<serde_json::Value>,
}

impl LanguageToolChecker {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        Self {
            url: url.into(),
            timeout,
        }
    }
}

fn blocking_client(timeout: Duration) -> reqwest::Result<reqwest::blocking::Client> {
    reqwest::blocking::Client::builder()
        .timeout(timeout)
        .build()
}

impl Checker for LanguageToolChecker {
    fn count_errors(&self, text: &str, dialect: Dialect) -> Result<usize, CheckerError> {
        let unavailable = |e: reqwest::Error| CheckerError::CheckerUnavailable(e.to_string());
        let language = match dialect {
            Dialect::EnGb => "en-GB",
            Dialect::EnUs => "en-US",
        };
        let resp = blocking_client(self.timeout)
            .map_err(unavailable)?
            .post(&self.url)
            .form(&[("text", text), ("language", language)])
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(unavailable)?;
        let body: CheckResponse = resp.json().map_err(unavailable)?;
        Ok(body.matches.len())
    }
}

/// OpenAI-style `/embeddings` endpoint.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    url: String,
    model: String,
    api_key: Option<String>,
    timeout: Duration,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    index: usize,
    embedding: Vec<f64>,
}

impl RemoteEmbedder {
    pub fn new(
        url: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<String>,
        timeout: Duration,
    ) -> Self {
        Self {
            url: url.into(),
            model: model.into(),
            api_key,
            timeout,
        }
    }
}

impl Embedder for RemoteEmbedder {
    fn embed_all(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, SimilarityError> {
        let fail = |e: reqwest::Error| SimilarityError::Embedder(e.to_string());
        let mut req = blocking_client(self.timeout)
            .map_err(fail)?
            .post(&self.url)
            .json(&json!({"model": self.model, "input": texts}));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(fail)?;
        let mut body: EmbeddingResponse = resp.json().map_err(fail)?;
        if body.data.len() != texts.len() {
            return Err(SimilarityError::Embedder(format!(
                "{} embeddings for {} texts",
                body.data.len(),
                texts.len()
            )));
        }
        body.data.sort_by_key(|d| d.index);
        Ok(body.data.into_iter().map(|d| d.embedding).collect())
    }
}
