//! HTTP facade over the vitals estimators, the patient triage store and the
//! dialog engine.
//!
//! | Method | Path | |
//! |---|---|---|
//! | POST | `/v1/vitals/jobs` | enqueue an estimation job, 202 `{job_id}` |
//! | GET | `/v1/vitals/jobs/{id}` | job state and result |
//! | GET | `/v1/patients?sort=score&name=&age=` | list, search, rank |
//! | GET/PUT/DELETE | `/v1/patients/{id}` | read, upsert (201 on create), delete |
//! | GET | `/v1/patients/{id}/score` | score breakdown |
//! | POST | `/v1/dialog/sessions` | start a session on `{graph_id}` |
//! | GET/DELETE | `/v1/dialog/sessions/{id}` | current view, close |
//! | POST | `/v1/dialog/sessions/{id}/step` | `{choice?}` |
//! | POST | `/v1/dialog/sessions/{id}/return` | back to a checkpoint |
//!
//! Errors are `{"error": "..."}` with 400, 404, 409 or 413.

pub mod config;
mod error;
pub mod jobs;
mod routes;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;
use parking_lot::Mutex;
use thiserror::Error;
use tokio::net::TcpListener;
use uuid::Uuid;
use vitalcam_core::dialog::{self, DialogError, DialogGraph};
use vitalcam_core::triage::{PatientStore, TriageConfig, TriageError};

pub use config::{ConfigError, ServiceConfig};
pub use error::ApiError;
pub use jobs::{JobQueue, JobState, VitalsJob};
pub use routes::dialog::SessionView;

/// Id of the bundled screening graph.
pub const SCREENING_GRAPH: &str = "screening";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("patient store: {0}")]
    Store(#[source] TriageError),
    #[error("triage config: {0}")]
    Triage(#[source] TriageError),
    #[error("dialog graph {id:?}: {source}")]
    Graph { id: String, source: DialogError },
    #[error("cannot read dialog graph {id:?}: {source}")]
    GraphRead { id: String, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct AppState {
    pub config: Arc<ServiceConfig>,
    pub store: Arc<PatientStore>,
    pub triage: Arc<TriageConfig>,
    pub jobs: Arc<JobQueue>,
    pub graphs: Arc<BTreeMap<String, Arc<DialogGraph>>>,
    sessions: Arc<Mutex<HashMap<Uuid, routes::dialog::OpenSession>>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Result<Self, ServiceError> {
        config.validate()?;
        let store = PatientStore::open(&config.store_path).map_err(ServiceError::Store)?;
        let triage = match &config.triage_config {
            Some(path) => TriageConfig::load(path).map_err(ServiceError::Triage)?,
            None => TriageConfig::default(),
        };
        let mut graphs = BTreeMap::new();
        graphs.insert(
            SCREENING_GRAPH.to_string(),
            Arc::new(dialog::screening_graph()),
        );
        for (id, path) in &config.graphs {
            let text = std::fs::read_to_string(path).map_err(|source| ServiceError::GraphRead {
                id: id.clone(),
                source,
            })?;
            let graph = DialogGraph::from_json(&text).map_err(|source| ServiceError::Graph {
                id: id.clone(),
                source,
            })?;
            graphs.insert(id.clone(), Arc::new(graph));
        }
        Ok(Self {
            jobs: Arc::new(JobQueue::new(config.workers)),
            config: Arc::new(config),
            store: Arc::new(store),
            triage: Arc::new(triage),
            graphs: Arc::new(graphs),
            sessions: Arc::default(),
        })
    }
}

pub fn router(state: AppState) -> Router {
    use routes::{dialog, patients, vitals};
    let body_limit = state.config.max_body_bytes;
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/v1/vitals/jobs", post(vitals::create_job))
        .route("/v1/vitals/jobs/{id}", get(vitals::get_job))
        .route("/v1/patients", get(patients::list))
        .route(
            "/v1/patients/{id}",
            get(patients::get_one)
                .put(patients::put)
                .delete(patients::delete),
        )
        .route("/v1/patients/{id}/score", get(patients::score))
        .route("/v1/dialog/sessions", post(dialog::start))
        .route(
            "/v1/dialog/sessions/{id}",
            get(dialog::get).delete(dialog::close),
        )
        .route("/v1/dialog/sessions/{id}/step", post(dialog::step))
        .route(
            "/v1/dialog/sessions/{id}/return",
            post(dialog::return_to_checkpoint),
        )
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(state)
}

/// Serves on an already bound listener until `shutdown` resolves.
pub async fn serve_on<F>(listener: TcpListener, state: AppState, shutdown: F) -> std::io::Result<()>
where
    F: std::future::Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Binds the configured address and serves until Ctrl-C.
pub async fn run(config: ServiceConfig) -> Result<(), ServiceError> {
    let addr = (config.host, config.port);
    let state = AppState::new(config)?;
    let listener = TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    serve_on(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}
