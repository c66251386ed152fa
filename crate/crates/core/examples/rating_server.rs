//! The rating service. With `--listen ADDR` it serves a synthetic corpus
//! until stopped; otherwise it runs a short scripted session in-process and
//! prints each exchange.
//!
//!     cargo run --example rating_server
//!     cargo run --example rating_server -- --listen 127.0.0.1:8080

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use scanres::corpus::{synth_corpus, SynthSpec};
use scanres::serve::{router, Session};

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (u16, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status().as_u16();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8_lossy(&bytes).into_owned())
}

#[tokio::main]
async fn main() -> scanres::Result<()> {
    let corpus = synth_corpus(&SynthSpec::new(6, 5))?;
    let dir = std::env::temp_dir().join("scanres-rating-example");
    std::fs::create_dir_all(&dir).ok();
    let ledger = dir.join("ratings.jsonl");
    std::fs::remove_file(&ledger).ok();
    let session = Session::new(&corpus.region_images(), &ledger, 0, true)?;
    let app = router(session, None);

    let args: Vec<String> = std::env::args().collect();
    if let Some(addr) = args.iter().position(|a| a == "--listen").and_then(|i| args.get(i + 1)) {
        let listener = tokio::net::TcpListener::bind(addr).await.expect("bind");
        println!("http://{} (ratings -> {})", listener.local_addr().expect("addr"), ledger.display());
        axum::serve(listener, app).await.expect("serve");
        return Ok(());
    }

    for score in ["B", "E", "A", "D"] {
        let (_, task) = call(&app, "GET", "/api/session/demo/next", None).await;
        let task: Value = serde_json::from_str(&task).unwrap();
        println!("next: {} ({} of {})", task["task_id"], task["sequence_index"], task["total"]);
        let body = json!({ "task_id": task["task_id"], "rater_id": "demo", "score": score });
        let (status, reply) = call(&app, "POST", "/api/ratings", Some(body)).await;
        println!("  rate {score}: {status} {reply}");
    }
    let (_, progress) = call(&app, "GET", "/api/progress/demo", None).await;
    println!("progress {progress}");
    println!("ledger:\n{}", std::fs::read_to_string(&ledger).unwrap_or_default());
    Ok(())
}
