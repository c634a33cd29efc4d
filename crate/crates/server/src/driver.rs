//! Drives a session through the HTTP API with the same [`Action`]
//! vocabulary the direct driver uses.

use cdlr_core::sim::{likert, Action};
use cdlr_core::SessionState;
use reqwest::blocking::Client;
use serde_json::{json, Value};

/// A rejected request: HTTP status and the error code from the body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejected {
    pub status: u16,
    pub code: String,
}

pub struct HttpSession {
    http: Client,
    base: String,
    pub session_id: String,
}

impl HttpSession {
    pub fn new(base: impl Into<String>, session_id: impl Into<String>) -> Self {
        Self {
            http: Client::new(),
            base: base.into(),
            session_id: session_id.into(),
        }
    }

    fn url(&self, op: &str) -> String {
        format!("{}/sessions/{}/{op}", self.base, self.session_id)
    }

    fn send(&self, req: reqwest::blocking::RequestBuilder) -> Result<Value, Rejected> {
        let resp = req.send().map_err(|e| Rejected {
            status: 0,
            code: e.to_string(),
        })?;
        let status = resp.status();
        let body: Value = resp.json().unwrap_or(Value::Null);
        if status.is_success() {
            Ok(body)
        } else {
            Err(Rejected {
                status: status.as_u16(),
                code: body["code"].as_str().unwrap_or("unknown").to_owned(),
            })
        }
    }

    pub fn post(&self, op: &str, body: Value) -> Result<Value, Rejected> {
        self.send(self.http.post(self.url(op)).json(&body))
    }

    pub fn state(&self) -> Result<SessionState, Rejected> {
        let url = format!("{}/sessions/{}", self.base, self.session_id);
        let view = self.send(self.http.get(url))?;
        serde_json::from_value(view["state"].clone()).map_err(|e| Rejected {
            status: 0,
            code: e.to_string(),
        })
    }

    /// Long-polls until the widget's set is ready or the widget is closed.
    pub fn wait_for_suggestions(&self, anchor: usize) -> Result<(), Rejected> {
        loop {
            let url = format!("{}?anchor={anchor}&wait_ms=5000", self.url("suggestions"));
            let body = self.send(self.http.get(url))?;
            if body["status"] != "pending" {
                return Ok(());
            }
        }
    }

    fn ranked_suggestion(&self, anchor: usize, rank: usize) -> Result<String, Rejected> {
        let state = self.state()?;
        Ok(state
            .widget(anchor)
            .and_then(|w| w.current_set())
            .and_then(|s| s.pages.iter().flatten().nth(rank).cloned())
            .unwrap_or_default())
    }

    /// Runs one action. Select and Type also wait for the resulting set, as
    /// the direct driver does.
    pub fn apply(&self, action: &Action) -> Result<(), Rejected> {
        match action {
            Action::Select { anchor } => {
                self.post("select", json!({ "anchor": anchor }))?;
                self.wait_for_suggestions(*anchor)
            }
            Action::Type { anchor, text } => {
                self.post("widget-text", json!({ "anchor": anchor, "text": text }))?;
                self.wait_for_suggestions(*anchor)
            }
            Action::Page { anchor, page } => self
                .post("page", json!({ "anchor": anchor, "page": page }))
                .map(drop),
            Action::Accept { anchor, rank } => {
                let id = self.ranked_suggestion(*anchor, *rank)?;
                self.post(
                    "accept-suggestion",
                    json!({ "anchor": anchor, "suggestion_id": id }),
                )
                .map(drop)
            }
            Action::Collapse { anchor } => {
                self.post("collapse", json!({ "anchor": anchor })).map(drop)
            }
            Action::Delete { anchor } => self.post("delete", json!({ "anchor": anchor })).map(drop),
            Action::Finalize => self.post("finalize", json!({})).map(drop),
            Action::Proceed => self.post("proceed", json!({})).map(drop),
            Action::EditDraft { text } => self.post("draft", json!({ "text": text })).map(drop),
            Action::Improve => self.post("improve", json!({})).map(drop),
            Action::Resolve { decision } => self
                .post("proposal", json!({ "decision": decision }))
                .map(drop),
            Action::MsgPrompt { text } => {
                self.post("msg-prompt", json!({ "text": text })).map(drop)
            }
            Action::MsgGenerate => self.post("msg-generate", json!({})).map(drop),
            Action::MsgResolve { decision } => self
                .post("msg-resolve", json!({ "decision": decision }))
                .map(drop),
            Action::Send => self.post("send", json!({})).map(drop),
            Action::Feedback { rating, comment } => self
                .post(
                    "feedback",
                    json!({ "ratings": likert(*rating), "comment": comment }),
                )
                .map(drop),
            Action::Briefing => {
                let url = self.url("briefing");
                self.send(self.http.get(url)).map(drop)
            }
        }
    }
}

/// Registers a participant and returns the session of its first task.
pub fn start_participant(base: &str, participant_index: u64) -> Result<HttpSession, Rejected> {
    let probe = HttpSession::new(base, "");
    let body = probe.send(
        probe
            .http
            .post(format!("{base}/participants"))
            .json(&json!({ "participant_index": participant_index })),
    )?;
    let sid = body["task"]["current"]["session_id"]
        .as_str()
        .unwrap_or_default()
        .to_owned();
    Ok(HttpSession::new(base, sid))
}
