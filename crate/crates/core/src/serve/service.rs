//! HTTP front end and scheduler. A single scheduler task runs scoring passes
//! on a fixed cadence and swaps in each finished snapshot; request handlers
//! only clone the current `Arc<Snapshot>`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::Duration as StdDuration;

use axum::extract::{Path, State};
use axum::http::{HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{scoring_pass, Snapshot};
use crate::error::{Error, Result};
use crate::models::ModelFile;
use crate::store::Store;

pub const GENERATED_AT_HEADER: &str = "x-generated-at";

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Wall time advancing with the tokio clock from a fixed origin; with a
/// paused runtime this gives deterministic timestamps.
pub struct TokioClock {
    origin: DateTime<Utc>,
    start: tokio::time::Instant,
}

impl TokioClock {
    pub fn new(origin: DateTime<Utc>) -> Self {
        TokioClock {
            origin,
            start: tokio::time::Instant::now(),
        }
    }
}

impl Clock for TokioClock {
    fn now(&self) -> DateTime<Utc> {
        let elapsed = tokio::time::Instant::now() - self.start;
        self.origin + chrono::Duration::from_std(elapsed).unwrap_or_default()
    }
}

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub store_dir: PathBuf,
    pub model_path: PathBuf,
    pub cadence: StdDuration,
    pub bind: SocketAddr,
    /// Consecutive failed passes after which health reports `degraded`.
    pub degraded_after: u32,
}

impl ServiceConfig {
    pub fn new(store_dir: PathBuf, model_path: PathBuf, bind: SocketAddr) -> Self {
        ServiceConfig {
            store_dir,
            model_path,
            cadence: StdDuration::from_secs(600),
            bind,
            degraded_after: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub last_pass_at: Option<DateTime<Utc>>,
    pub articles_scored: usize,
    #[serde(skip)]
    pub consecutive_failures: u32,
}

pub struct AppState {
    snapshot: RwLock<Arc<Snapshot>>,
    health: RwLock<Health>,
    degraded_after: u32,
}

impl AppState {
    pub fn new(now: DateTime<Utc>, degraded_after: u32) -> Self {
        AppState {
            snapshot: RwLock::new(Arc::new(Snapshot::empty(now))),
            health: RwLock::new(Health {
                status: "starting".into(),
                last_pass_at: None,
                articles_scored: 0,
                consecutive_failures: 0,
            }),
            degraded_after,
        }
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn health(&self) -> Health {
        self.health.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Replace the served snapshot after a successful pass.
    pub fn publish(&self, snapshot: Snapshot) {
        let mut h = self.health.write().unwrap_or_else(|e| e.into_inner());
        h.status = "ok".into();
        h.last_pass_at = Some(snapshot.generated_at);
        h.articles_scored = snapshot.entries.len();
        h.consecutive_failures = 0;
        *self.snapshot.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(snapshot);
    }

    /// Record a failed pass; the previous snapshot stays served.
    pub fn record_failure(&self, err: &Error) {
        log::error!("scoring pass failed: {err}");
        let mut h = self.health.write().unwrap_or_else(|e| e.into_inner());
        h.consecutive_failures += 1;
        if h.consecutive_failures >= self.degraded_after {
            h.status = "degraded".into();
        }
    }

    /// Load the store, score it and publish the result.
    pub fn run_pass(&self, store_dir: &std::path::Path, model: &ModelFile, now: DateTime<Utc>) -> Result<()> {
        let outcome = Store::load(store_dir).and_then(|store| scoring_pass(&store, model, now));
        match outcome {
            Ok(snapshot) => {
                log::info!("scored {} articles at {now}", snapshot.entries.len());
                self.publish(snapshot);
                Ok(())
            }
            Err(e) => {
                self.record_failure(&e);
                Err(e)
            }
        }
    }
}

fn with_generated_at(snapshot: &Snapshot, body: impl IntoResponse) -> Response {
    let mut headers = HeaderMap::new();
    if let Ok(v) = HeaderValue::from_str(&snapshot.generated_at.to_rfc3339()) {
        headers.insert(GENERATED_AT_HEADER, v);
    }
    (headers, body).into_response()
}

async fn ranknews(State(state): State<Arc<AppState>>) -> Response {
    let snap = state.snapshot();
    with_generated_at(&snap, Json(snap.entries.clone()))
}

async fn timeseries(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let snap = state.snapshot();
    match snap.series.get(&id) {
        Some(series) => with_generated_at(&snap, Json(series.clone())),
        None => (StatusCode::NOT_FOUND, Json(serde_json::json!({ "error": "unknown article id" }))).into_response(),
    }
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    let snap = state.snapshot();
    with_generated_at(&snap, Json(state.health()))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/ranknews", get(ranknews))
        .route("/timeseries/{id}", get(timeseries))
        .route("/health", get(health))
        .with_state(state)
}

/// Run a pass immediately and then every `cadence`, forever. Passes run on
/// the scheduler task itself, so they never overlap.
pub async fn scheduler(
    state: Arc<AppState>,
    store_dir: PathBuf,
    model: Arc<ModelFile>,
    cadence: StdDuration,
    clock: Arc<dyn Clock>,
) {
    let mut ticker = tokio::time::interval(cadence);
    ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        ticker.tick().await;
        let _ = state.run_pass(&store_dir, &model, clock.now());
    }
}

/// Load the model, bind, and serve until the process is stopped.
pub async fn run_service(config: ServiceConfig) -> Result<()> {
    let model = Arc::new(ModelFile::load(&config.model_path)?);
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let state = Arc::new(AppState::new(clock.now(), config.degraded_after));
    let listener = tokio::net::TcpListener::bind(config.bind)
        .await
        .map_err(|e| Error::Service(format!("cannot bind {}: {e}", config.bind)))?;
    log::info!("serving on {}", config.bind);
    tokio::spawn(scheduler(
        state.clone(),
        config.store_dir.clone(),
        model,
        config.cadence,
        clock,
    ));
    axum::serve(listener, router(state))
        .await
        .map_err(|e| Error::Service(e.to_string()))
}
