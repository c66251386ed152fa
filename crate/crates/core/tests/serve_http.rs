use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::Path;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use scanres::corpus::{load_ratings, RegionImage, Score};
use scanres::serve::{router, Session};
use scanres::{DpiLevel, GrayImage};

fn regions(n: usize) -> Vec<RegionImage> {
    (0..n)
        .map(|k| RegionImage {
            id: format!("region-{k}"),
            subset: None,
            image: GrayImage::from_fn(36, 30, DpiLevel::D300, |x, y| ((x * 13 + y * (5 + k) + x * y) % 256) as u8)
                .unwrap(),
        })
        .collect()
}

struct Reply {
    status: u16,
    content_type: String,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap()
    }
}

fn dechunk(mut raw: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    loop {
        let eol = raw.windows(2).position(|w| w == b"\r\n").unwrap();
        let size = usize::from_str_radix(std::str::from_utf8(&raw[..eol]).unwrap().trim(), 16).unwrap();
        if size == 0 {
            return out;
        }
        out.extend_from_slice(&raw[eol + 2..eol + 2 + size]);
        raw = &raw[eol + 4 + size..];
    }
}

/// Minimal HTTP/1.1 client: one request per connection.
fn http(addr: SocketAddr, method: &str, path: &str, body: Option<&str>) -> Reply {
    let mut s = TcpStream::connect(addr).unwrap();
    let body = body.unwrap_or("");
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut raw = Vec::new();
    s.read_to_end(&mut raw).unwrap();
    let split = raw.windows(4).position(|w| w == b"\r\n\r\n").unwrap();
    let head = String::from_utf8_lossy(&raw[..split]).to_string();
    let mut lines = head.lines();
    let status = lines.next().unwrap().split(' ').nth(1).unwrap().parse().unwrap();
    let mut content_type = String::new();
    let mut chunked = false;
    for l in lines {
        let (k, v) = l.split_once(':').unwrap();
        match k.to_ascii_lowercase().as_str() {
            "content-type" => content_type = v.trim().to_string(),
            "transfer-encoding" => chunked = v.trim().eq_ignore_ascii_case("chunked"),
            _ => {}
        }
    }
    let rest = &raw[split + 4..];
    let body = if chunked { dechunk(rest) } else { rest.to_vec() };
    Reply {
        status,
        content_type,
        body,
    }
}

/// Starts the router on an ephemeral port in a background runtime.
fn spawn(session: Session, ui: Option<&Path>) -> SocketAddr {
    let app = router(session, ui);
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    rx.recv().unwrap()
}

fn rating(task: &str, rater: &str, score: &str) -> String {
    json!({ "task_id": task, "rater_id": rater, "score": score }).to_string()
}

#[test]
fn scripted_session_over_tcp() {
    let dir = tempfile::tempdir().unwrap();
    let ledger = dir.path().join("ratings.jsonl");
    let addr = spawn(Session::new(&regions(3), &ledger, 11, false).unwrap(), None);
    let total = 12;

    let scores = ["A", "B", "C", "D"];
    let mut presented = Vec::new();
    for i in 0..10 {
        let r = http(addr, "GET", "/api/session/ana/next", None);
        assert_eq!(r.status, 200);
        let task = r.json();
        assert_eq!(task["sequence_index"], i);
        assert_eq!(task["total"], total);
        let id = task["task_id"].as_str().unwrap().to_string();

        let png = http(addr, "GET", task["stimulus"].as_str().unwrap(), None);
        assert_eq!(png.status, 200);
        assert_eq!(png.content_type, "image/png");
        let img = image::load_from_memory(&png.body).unwrap();
        assert_eq!((img.width(), img.height()), (36, 30));

        if i == 3 {
            let bad = http(addr, "POST", "/api/ratings", Some(&rating(&id, "ana", "E")));
            assert_eq!(bad.status, 400);
        }
        let ok = http(addr, "POST", "/api/ratings", Some(&rating(&id, "ana", scores[i % 4])));
        assert_eq!(ok.status, 201, "{}", String::from_utf8_lossy(&ok.body));
        assert_eq!(ok.json()["score"], scores[i % 4]);
        presented.push((id, scores[i % 4]));
    }

    let stored = load_ratings(&ledger).unwrap();
    assert_eq!(stored.len(), 10);
    for (rec, (id, score)) in stored.iter().zip(&presented) {
        assert_eq!(&scanres::serve::task_id(&rec.region_id, rec.dpi), id);
        assert_eq!(rec.score, score.parse::<Score>().unwrap());
        assert_eq!(rec.rater_id, "ana");
    }

    let dup = http(addr, "POST", "/api/ratings", Some(&rating(&presented[0].0, "ana", "A")));
    assert_eq!(dup.status, 409);
    let unknown = http(addr, "POST", "/api/ratings", Some(&rating("nowhere@100", "ana", "A")));
    assert_eq!(unknown.status, 404);
    assert_eq!(http(addr, "GET", "/api/stimulus/nowhere@100", None).status, 404);

    let p = http(addr, "GET", "/api/progress/ana", None).json();
    assert_eq!((p["done"].as_u64(), p["total"].as_u64()), (Some(10), Some(total)));

    while let r @ Reply { status: 200, .. } = http(addr, "GET", "/api/session/ana/next", None) {
        let id = r.json()["task_id"].as_str().unwrap().to_string();
        assert_eq!(http(addr, "POST", "/api/ratings", Some(&rating(&id, "ana", "B"))).status, 201);
    }
    assert_eq!(http(addr, "GET", "/api/session/ana/next", None).status, 204);
    assert_eq!(load_ratings(&ledger).unwrap().len(), total as usize);

    // A different rater starts from scratch.
    let p = http(addr, "GET", "/api/progress/ben", None).json();
    assert_eq!(p["done"], 0);
}

async fn call(app: axum::Router, method: &str, uri: &str, body: &str) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let res = app.oneshot(req).await.unwrap();
    let status = res.status();
    (status, res.into_body().collect().await.unwrap().to_bytes().to_vec())
}

#[tokio::test]
async fn malformed_submissions_are_rejected_and_not_stored() {
    let dir = tempfile::tempdir().unwrap();
    let ledger = dir.path().join("r.jsonl");
    let app = router(Session::new(&regions(1), &ledger, 0, false).unwrap(), None);
    let task = "region-0@150";
    for body in [
        "not json".to_string(),
        json!({ "task_id": task, "score": "A" }).to_string(),
        json!({ "task_id": task, "rater_id": "", "score": "A" }).to_string(),
        json!({ "task_id": task, "rater_id": "x", "score": "a" }).to_string(),
        json!({ "task_id": task, "rater_id": "x", "score": 1 }).to_string(),
        rating(task, "x", "E"),
    ] {
        let (status, _) = call(app.clone(), "POST", "/api/ratings", &body).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
    }
    assert!(load_ratings(&ledger).unwrap().is_empty());
    let (status, _) = call(app.clone(), "POST", "/api/ratings", &rating(task, "x", "C")).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(load_ratings(&ledger).unwrap().len(), 1);
}

#[tokio::test]
async fn restarted_session_resumes_from_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let ledger = dir.path().join("r.jsonl");
    let first = router(Session::new(&regions(2), &ledger, 4, false).unwrap(), None);
    let (_, body) = call(first.clone(), "GET", "/api/session/kim/next", "").await;
    let t: Value = serde_json::from_slice(&body).unwrap();
    let id = t["task_id"].as_str().unwrap();
    call(first, "POST", "/api/ratings", &rating(id, "kim", "A")).await;

    let second = router(Session::new(&regions(2), &ledger, 4, false).unwrap(), None);
    let (_, body) = call(second.clone(), "GET", "/api/progress/kim", "").await;
    assert_eq!(serde_json::from_slice::<Value>(&body).unwrap()["done"], 1);
    let (_, body) = call(second.clone(), "GET", "/api/session/kim/next", "").await;
    let t2: Value = serde_json::from_slice(&body).unwrap();
    assert_ne!(t2["task_id"], t["task_id"]);
    assert_eq!(t2["sequence_index"], 1);
    let (status, _) = call(second, "POST", "/api/ratings", &rating(id, "kim", "B")).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn reference_images_and_static_ui() {
    let dir = tempfile::tempdir().unwrap();
    let ui = dir.path().join("ui");
    std::fs::create_dir(&ui).unwrap();
    std::fs::write(ui.join("index.html"), "<h1>rate me</h1>").unwrap();
    let session = Session::new(&regions(1), &dir.path().join("r.jsonl"), 0, true).unwrap();
    let app = router(session, Some(&ui));

    let (_, body) = call(app.clone(), "GET", "/api/session/lee/next", "").await;
    let t: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(t["reference"], "/api/reference/region-0");
    let (status, png) = call(app.clone(), "GET", "/api/reference/region-0", "").await;
    assert_eq!(status, StatusCode::OK);
    let img = image::load_from_memory(&png).unwrap().to_luma8();
    assert_eq!(img.as_raw().as_slice(), regions(1)[0].image.pixels());
    let (status, _) = call(app.clone(), "GET", "/api/reference/missing", "").await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, page) = call(app.clone(), "GET", "/index.html", "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(page, b"<h1>rate me</h1>");
}

#[tokio::test]
async fn placeholder_page_without_ui_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(Session::new(&regions(1), &dir.path().join("r.jsonl"), 0, false).unwrap(), None);
    let (status, page) = call(app.clone(), "GET", "/", "").await;
    assert_eq!(status, StatusCode::OK);
    assert!(String::from_utf8(page).unwrap().contains("/api/session/"));
    let (_, body) = call(app.clone(), "GET", "/api/session/zoe/next", "").await;
    let t: Value = serde_json::from_slice(&body).unwrap();
    assert!(t.get("reference").is_none());
    let (status, _) = call(app, "GET", "/api/reference/region-0", "").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}
