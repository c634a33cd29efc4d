use std::time::Duration;

use axum::routing::post;
use axum::{Form, Json, Router};
use cdlr_core::analytics::{error_rate, Checker, CheckerError, Dialect, Embedder};
use cdlr_server::adapters::{LanguageToolChecker, RemoteEmbedder};
use serde_json::{json, Value};

fn serve(app: Router) -> String {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_current_thread()
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

/// Flags "colour" for en-US and "color" for en-GB, one match each.
async fn check(Form(form): Form<Vec<(String, String)>>) -> Json<Value> {
    let get = |k: &str| {
        form.iter()
            .find(|(n, _)| n == k)
            .map(|(_, v)| v.clone())
            .unwrap()
    };
    let flagged = if get("language") == "en-US" {
        "colour"
    } else {
        "color"
    };
    let n = get("text").matches(flagged).count();
    Json(json!({"matches": vec![json!({"rule": "x"}); n]}))
}

#[test]
fn checker_counts_matches_per_dialect() {
    let base = serve(Router::new().route("/v2/check", post(check)));
    let checker = LanguageToolChecker::new(format!("{base}/v2/check"), Duration::from_secs(2));
    let text = "The colour and the colour.";
    assert_eq!(checker.count_errors(text, Dialect::EnUs).unwrap(), 2);
    assert_eq!(checker.count_errors(text, Dialect::EnGb).unwrap(), 0);
    assert_eq!(error_rate(text, &checker).unwrap(), 0.0);
}

#[test]
fn unreachable_checker_is_reported() {
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let checker = LanguageToolChecker::new(
        format!("http://127.0.0.1:{port}/v2/check"),
        Duration::from_millis(300),
    );
    assert!(matches!(
        checker.count_errors("text", Dialect::EnGb),
        Err(CheckerError::CheckerUnavailable(_))
    ));
}

#[test]
fn embedder_restores_input_order() {
    let base = serve(Router::new().route(
        "/v1/embeddings",
        post(|Json(body): Json<Value>| async move {
            let n = body["input"].as_array().unwrap().len();
            let data: Vec<Value> = (0..n)
                .rev()
                .map(|i| json!({"index": i, "embedding": [i as f64, 1.0]}))
                .collect();
            Json(json!({"data": data}))
        }),
    ));
    let embedder = RemoteEmbedder::new(
        cdlr_server::remote::embeddings_url(&format!("{base}/v1/chat/completions")),
        "emb",
        None,
        Duration::from_secs(2),
    );
    let out = embedder.embed_all(&["a", "b", "c"]).unwrap();
    assert_eq!(out, vec![vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, 1.0]]);
}
