use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::routing::post;
use axum::{Json, Router};
use cdlr_core::prompting::{render_prompt, PromptVariables, TemplateId};
use cdlr_core::{LlmClient, LlmError, LlmRequest};
use cdlr_server::{build_client, Config, LlmSettings, RemoteClient};
use serde_json::{json, Value};

fn settings(retries: u32, timeout_ms: u64) -> LlmSettings {
    let mut s = Config::default().llm;
    s.retries = retries;
    s.timeout = Duration::from_millis(timeout_ms);
    s.mock = false;
    s
}

fn request() -> LlmRequest {
    let vars = PromptVariables {
        sender: Some("Priya".into()),
        email_text: Some("Hi Jamie, can you join?".into()),
        input: Some("yes".into()),
        ..Default::default()
    };
    let prompt = render_prompt(TemplateId::MessageReply, &vars).unwrap();
    LlmRequest::new(prompt, vars, 7000)
}

#[derive(Clone, Default)]
struct Stub {
    hits: Arc<AtomicUsize>,
    bodies: Arc<Mutex<Vec<Value>>>,
}

/// Serves `reply` on /v1/chat/completions on a thread of its own.
fn stub(reply: fn(usize) -> (u16, String)) -> (String, Stub) {
    let stub = Stub::default();
    let s = stub.clone();
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let app = Router::new().route(
                "/v1/chat/completions",
                post(move |Json(body): Json<Value>| {
                    let s = s.clone();
                    async move {
                        let n = s.hits.fetch_add(1, Ordering::SeqCst);
                        s.bodies.lock().unwrap().push(body);
                        let (code, text) = reply(n);
                        if code == 999 {
                            tokio::time::sleep(Duration::from_millis(500)).await;
                            return (axum::http::StatusCode::OK, text);
                        }
                        (axum::http::StatusCode::from_u16(code).unwrap(), text)
                    }
                }),
            );
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    let addr = rx.recv().unwrap();
    (format!("http://{addr}/v1"), stub)
}

fn completion(text: &str) -> String {
    json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}

#[test]
fn sends_chat_messages_and_reads_the_first_choice() {
    let (endpoint, stub) = stub(|_| (200, completion("  Sounds good, count me in.  ")));
    let client = RemoteClient::new(&endpoint, &settings(0, 2000));
    let resp = client.complete(&request()).unwrap();
    assert_eq!(resp.text, "Sounds good, count me in.");
    let body = stub.bodies.lock().unwrap()[0].clone();
    let messages = body["messages"].as_array().unwrap();
    assert_eq!(messages[0]["role"], "system");
    assert_eq!(messages.last().unwrap()["role"], "user");
    // Few-shot pairs sit between the system and final user turns.
    assert_eq!((messages.len() - 2) % 2, 0);
    assert_eq!(body["seed"], 7000);
}

#[test]
fn server_errors_use_the_retry_budget() {
    let (endpoint, stub) = stub(|_| (500, "oops".into()));
    let client = RemoteClient::new(&endpoint, &settings(2, 2000));
    let err = client.complete(&request()).unwrap_err();
    assert!(matches!(err, LlmError::EndpointUnavailable(_)), "{err:?}");
    assert_eq!(stub.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn recovers_when_a_retry_succeeds() {
    let (endpoint, stub) = stub(|n| {
        if n == 0 {
            (503, String::new())
        } else {
            (200, completion("ok"))
        }
    });
    let client = RemoteClient::new(&endpoint, &settings(1, 2000));
    assert_eq!(client.complete(&request()).unwrap().text, "ok");
    assert_eq!(stub.hits.load(Ordering::SeqCst), 2);
}

#[test]
fn closed_port_is_endpoint_unavailable() {
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let client = RemoteClient::new(&format!("http://127.0.0.1:{port}/v1"), &settings(1, 500));
    assert!(matches!(
        client.complete(&request()),
        Err(LlmError::EndpointUnavailable(_))
    ));
}

#[test]
fn garbage_is_malformed() {
    let (endpoint, _) = stub(|_| (200, "{\"choices\": []}".into()));
    let client = RemoteClient::new(&endpoint, &settings(0, 2000));
    assert!(matches!(
        client.complete(&request()),
        Err(LlmError::MalformedResponse(_))
    ));
}

#[test]
fn slow_endpoint_times_out() {
    let (endpoint, _) = stub(|_| (999, completion("late")));
    let client = RemoteClient::new(&endpoint, &settings(0, 100));
    assert!(matches!(
        client.complete(&request()),
        Err(LlmError::Timeout(100))
    ));
}

#[test]
fn mock_mode_never_calls_the_endpoint() {
    let (endpoint, stub) = stub(|_| (200, completion("remote")));
    let mut s = settings(0, 2000);
    s.endpoint = Some(endpoint);
    s.mock = true;
    let client = build_client(&s).unwrap();
    let text = client.complete(&request()).unwrap().text;
    assert_ne!(text, "remote");
    assert_eq!(stub.hits.load(Ordering::SeqCst), 0);
}
