//! HTTP service for collecting A-D ratings of emulated stimuli.
//!
//! Each rater sees every (region, dpi) stimulus exactly once, in an order
//! seeded by the session seed and the rater id. Accepted ratings are
//! appended to a JSONL file and synced before the response is sent.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::{load_ratings, CorpusManifest, RatingRecord, RegionImage, Score};
use crate::error::{Error, Result};
use crate::raster::{emulate_dpi, encode_png, DpiLevel};
use crate::seed::{derive_seed, hash_str, rng};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingTask {
    pub task_id: String,
    pub region_id: String,
    pub dpi: DpiLevel,
    /// URL of the PNG stimulus.
    pub stimulus: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    pub sequence_index: usize,
    pub total: usize,
}

pub fn task_id(region_id: &str, dpi: DpiLevel) -> String {
    format!("{region_id}@{}", dpi.value())
}

struct Stimulus {
    region_id: String,
    dpi: DpiLevel,
    png: Vec<u8>,
}

struct Ledger {
    file: File,
    done: HashSet<(String, String)>,
}

/// Shared state of one rating session.
pub struct Session {
    seed: u64,
    tasks: Vec<String>,
    stimuli: HashMap<String, Stimulus>,
    references: Option<HashMap<String, Vec<u8>>>,
    ledger: Mutex<Ledger>,
}

impl Session {
    /// Renders every stimulus up front. Existing records in `ratings_path`
    /// count as done, so a restarted session resumes.
    pub fn new(regions: &[RegionImage], ratings_path: &Path, seed: u64, reference: bool) -> Result<Self> {
        let mut tasks = Vec::new();
        let mut stimuli = HashMap::new();
        for r in regions {
            for dpi in DpiLevel::ASCENDING {
                let id = task_id(&r.id, dpi);
                let png = encode_png(&emulate_dpi(&r.image, dpi)?.at_base)?;
                if stimuli
                    .insert(id.clone(), Stimulus { region_id: r.id.clone(), dpi, png })
                    .is_some()
                {
                    return Err(Error::ParseError(format!("duplicate task {id}")));
                }
                tasks.push(id);
            }
        }
        if tasks.is_empty() {
            return Err(Error::EmptyInput);
        }
        let references = if reference {
            Some(
                regions
                    .iter()
                    .map(|r| Ok((r.id.clone(), encode_png(&r.image)?)))
                    .collect::<Result<HashMap<_, _>>>()?,
            )
        } else {
            None
        };
        let done = if ratings_path.exists() {
            load_ratings(ratings_path)?
                .into_iter()
                .map(|r| (r.rater_id.clone(), task_id(&r.region_id, r.dpi)))
                .collect()
        } else {
            HashSet::new()
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(ratings_path)
            .map_err(|e| Error::io(ratings_path, e))?;
        Ok(Session {
            seed,
            tasks,
            stimuli,
            references,
            ledger: Mutex::new(Ledger { file, done }),
        })
    }

    pub fn from_manifest(manifest: &Path, ratings_path: &Path, seed: u64, reference: bool) -> Result<Self> {
        let regions = CorpusManifest::load(manifest)?.raster_regions()?;
        Session::new(&regions, ratings_path, seed, reference)
    }

    pub fn total(&self) -> usize {
        self.tasks.len()
    }

    /// Presentation order for `rater`.
    pub fn order(&self, rater: &str) -> Vec<&str> {
        let mut order: Vec<&str> = self.tasks.iter().map(String::as_str).collect();
        order.shuffle(&mut rng(derive_seed(self.seed, &[hash_str(rater)])));
        order
    }

    fn task(&self, id: &str, index: usize) -> RatingTask {
        let s = &self.stimuli[id];
        RatingTask {
            task_id: id.to_string(),
            region_id: s.region_id.clone(),
            dpi: s.dpi,
            stimulus: format!("/api/stimulus/{id}"),
            reference: self.references.as_ref().map(|_| format!("/api/reference/{}", s.region_id)),
            sequence_index: index,
            total: self.tasks.len(),
        }
    }

    pub fn next(&self, rater: &str) -> Option<RatingTask> {
        let ledger = self.ledger.lock().expect("ledger lock");
        self.order(rater)
            .into_iter()
            .enumerate()
            .find(|(_, id)| !ledger.done.contains(&(rater.to_string(), id.to_string())))
            .map(|(i, id)| self.task(id, i))
    }

    pub fn progress(&self, rater: &str) -> (usize, usize) {
        let ledger = self.ledger.lock().expect("ledger lock");
        let done = self.tasks.iter().filter(|t| ledger.done.contains(&(rater.to_string(), t.to_string()))).count();
        (done, self.tasks.len())
    }

    /// Validates and durably records one rating.
    pub fn submit(&self, task: &str, rater: &str, score: Score) -> std::result::Result<RatingRecord, SubmitError> {
        let s = self.stimuli.get(task).ok_or(SubmitError::UnknownTask)?;
        let mut ledger = self.ledger.lock().expect("ledger lock");
        let key = (rater.to_string(), task.to_string());
        if ledger.done.contains(&key) {
            return Err(SubmitError::Duplicate);
        }
        let record = RatingRecord {
            region_id: s.region_id.clone(),
            dpi: s.dpi,
            rater_id: rater.to_string(),
            score,
            timestamp: chrono::Utc::now().format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string(),
        };
        let mut line = serde_json::to_string(&record).expect("record serializes");
        line.push('\n');
        ledger
            .file
            .write_all(line.as_bytes())
            .and_then(|_| ledger.file.sync_data())
            .map_err(|e| SubmitError::Storage(e.to_string()))?;
        ledger.done.insert(key);
        Ok(record)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubmitError {
    UnknownTask,
    Duplicate,
    Storage(String),
}

type Shared = Arc<AppState>;

pub struct AppState {
    pub session: Session,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

async fn next_task(State(s): State<Shared>, UrlPath(rater): UrlPath<String>) -> Response {
    match s.session.next(&rater) {
        Some(t) => Json(t).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    }
}

async fn progress(State(s): State<Shared>, UrlPath(rater): UrlPath<String>) -> Response {
    let (done, total) = s.session.progress(&rater);
    Json(json!({ "done": done, "total": total })).into_response()
}

async fn submit(State(s): State<Shared>, body: Bytes) -> Response {
    let v: serde_json::Value = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("invalid JSON: {e}")),
    };
    let field = |k: &str| v.get(k).and_then(|x| x.as_str());
    let (Some(task), Some(rater)) = (field("task_id"), field("rater_id")) else {
        return error(StatusCode::BAD_REQUEST, "task_id and rater_id must be strings");
    };
    if rater.is_empty() {
        return error(StatusCode::BAD_REQUEST, "empty rater_id");
    }
    let score: Score = match field("score").map(str::parse) {
        Some(Ok(s)) => s,
        _ => return error(StatusCode::BAD_REQUEST, "score must be one of \"A\", \"B\", \"C\", \"D\""),
    };
    let (task, rater) = (task.to_string(), rater.to_string());
    let (t, r) = (task.clone(), rater.clone());
    let outcome = match tokio::task::spawn_blocking(move || s.session.submit(&t, &r, score)).await {
        Ok(o) => o,
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    };
    match outcome {
        Ok(record) => (StatusCode::CREATED, Json(record)).into_response(),
        Err(SubmitError::UnknownTask) => error(StatusCode::NOT_FOUND, format!("unknown task {task}")),
        Err(SubmitError::Duplicate) => error(StatusCode::CONFLICT, format!("{rater} already rated {task}")),
        Err(SubmitError::Storage(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
    }
}

fn png(bytes: &[u8]) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes.to_vec()).into_response()
}

async fn stimulus(State(s): State<Shared>, UrlPath(task): UrlPath<String>) -> Response {
    match s.session.stimuli.get(&task) {
        Some(st) => png(&st.png),
        None => error(StatusCode::NOT_FOUND, format!("unknown task {task}")),
    }
}

async fn reference(State(s): State<Shared>, UrlPath(region): UrlPath<String>) -> Response {
    match s.session.references.as_ref().and_then(|r| r.get(&region)) {
        Some(bytes) => png(bytes),
        None => error(StatusCode::NOT_FOUND, format!("no reference for {region}")),
    }
}

const PLACEHOLDER: &str = "<!doctype html><meta charset=utf-8><title>scanres rating</title>\
<p>No UI bundle configured (start with <code>--ui-dir</code>). API: \
<code>GET /api/session/{rater}/next</code>, <code>POST /api/ratings</code>, \
<code>GET /api/progress/{rater}</code>, <code>GET /api/stimulus/{task_id}</code>.</p>";

pub fn router(session: Session, ui_dir: Option<&Path>) -> Router {
    let state = Arc::new(AppState { session });
    let api = Router::new()
        .route("/api/session/{rater}/next", get(next_task))
        .route("/api/ratings", post(submit))
        .route("/api/progress/{rater}", get(progress))
        .route("/api/stimulus/{task_id}", get(stimulus))
        .route("/api/reference/{region_id}", get(reference))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(PLACEHOLDER) })),
    }
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub manifest: PathBuf,
    pub ratings: PathBuf,
    pub seed: u64,
    pub addr: SocketAddr,
    pub reference: bool,
    pub ui_dir: Option<PathBuf>,
}

/// Binds and serves until the process is stopped.
pub async fn serve(config: ServeConfig) -> Result<()> {
    let session = Session::from_manifest(&config.manifest, &config.ratings, config.seed, config.reference)?;
    let total = session.total();
    let app = router(session, config.ui_dir.as_deref());
    let listener = tokio::net::TcpListener::bind(config.addr)
        .await
        .map_err(|e| Error::io(config.addr.to_string(), e))?;
    let local = listener.local_addr().map_err(|e| Error::io(config.addr.to_string(), e))?;
    log::info!("serving {total} stimuli on http://{local}");
    axum::serve(listener, app).await.map_err(|e| Error::io(local.to_string(), e))
}
