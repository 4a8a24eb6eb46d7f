//! HTTP facade over judgment evaluation and scenario runs.
//!
//! | method | path | result |
//! |---|---|---|
//! | POST | `/api/ahp/evaluate` | weights and consistency of a judgment matrix |
//! | POST | `/api/scenarios` | registers a scenario config, returns its id |
//! | POST | `/api/scenarios/{id}/run` | queues the run (202) |
//! | GET | `/api/scenarios/{id}` | status and, once done, the result summary |
//! | GET | `/api/scenarios/{id}/map` | class map PNG |
//! | GET | `/api/scenarios/{id}/sensitivity` | sensitivity table |
//!
//! Config paths are resolved against the data root and may not leave it.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Semaphore;

use solarsite_core::ahp::{self, MAX_CRITERIA};
use solarsite_core::mcda::SensitivityRow;
use solarsite_core::pipeline::{self, config::judgment_values, Judgment, LoadOptions, RunSummary, ScenarioConfig};
use solarsite_core::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Draft,
    Running,
    Done,
    Failed,
}

#[derive(Debug)]
struct Entry {
    config: ScenarioConfig,
    status: Status,
    summary: Option<RunSummary>,
    sensitivity: Option<Vec<SensitivityRow>>,
    n_classes: usize,
    error: Option<String>,
    out_dir: PathBuf,
}

pub struct AppState {
    data_root: PathBuf,
    runs_dir: PathBuf,
    scenarios: Mutex<HashMap<String, Entry>>,
    queue: Arc<Semaphore>,
}

impl AppState {
    /// `parallelism` bounds how many pipeline runs execute at once.
    pub fn new(data_root: &Path, runs_dir: &Path, parallelism: usize) -> anyhow::Result<Arc<Self>> {
        let data_root = data_root
            .canonicalize()
            .map_err(|e| anyhow::anyhow!("data root {}: {e}", data_root.display()))?;
        std::fs::create_dir_all(runs_dir)?;
        Ok(Arc::new(AppState {
            data_root,
            runs_dir: runs_dir.to_path_buf(),
            scenarios: Mutex::new(HashMap::new()),
            queue: Arc::new(Semaphore::new(parallelism.max(1))),
        }))
    }

    pub fn data_root(&self) -> &Path {
        &self.data_root
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/ahp/evaluate", post(evaluate))
        .route("/api/scenarios", post(create_scenario))
        .route("/api/scenarios/{id}", get(get_scenario))
        .route("/api/scenarios/{id}/run", post(run_scenario))
        .route("/api/scenarios/{id}/map", get(get_map))
        .route("/api/scenarios/{id}/sensitivity", get(get_sensitivity))
        .with_state(state)
}

struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: json!({ "error": message.into() }),
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown scenario {id}"))
    }

    /// Maps a core error to a response, with per-cell detail for matrices
    /// and the measured ratio for consistency failures.
    fn from_core(status: StatusCode, e: &Error) -> Self {
        let mut body = json!({ "error": e.to_string() });
        match e {
            Error::Matrix(v) => body["violations"] = json!(v),
            Error::Inconsistent { cr, threshold } => {
                body["cr"] = json!(cr);
                body["threshold"] = json!(threshold);
            }
            _ => {}
        }
        ApiError { status, body }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

/// Bare `[[..]]` or `{"matrix": [[..]]}`.
#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixBody {
    Bare(Vec<Vec<Judgment>>),
    Wrapped { matrix: Vec<Vec<Judgment>> },
}

async fn evaluate(body: Bytes) -> Result<Json<ahp::AhpEvaluation>, ApiError> {
    let parsed: MatrixBody = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("expected a JSON array of rows: {e}")))?;
    let rows = match parsed {
        MatrixBody::Bare(m) | MatrixBody::Wrapped { matrix: m } => m,
    };
    if rows.len() > MAX_CRITERIA {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("matrix has {} rows, at most {MAX_CRITERIA} are supported", rows.len()),
        ));
    }
    let raw = judgment_values(&rows).map_err(|e| ApiError::from_core(StatusCode::BAD_REQUEST, &e))?;
    let eval = ahp::evaluate(&raw).map_err(|e| ApiError::from_core(StatusCode::BAD_REQUEST, &e))?;
    Ok(Json(eval))
}

/// Everything checkable without running: structure, sandboxed file
/// references and matrix consistency.
fn validate_config(state: &AppState, config: &ScenarioConfig) -> Result<(), Error> {
    config.check_structure()?;
    for p in config.referenced_paths() {
        pipeline::resolve_path(&state.data_root, p, Some(&state.data_root))?;
    }
    pipeline::config_weights(config, false)?;
    Ok(())
}

async fn create_scenario(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "body is not UTF-8"))?;
    let config: ScenarioConfig = serde_json::from_str(text).map_err(|e| {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("invalid scenario config: {e}"),
        )
    })?;
    validate_config(&state, &config).map_err(|e| ApiError::from_core(StatusCode::UNPROCESSABLE_ENTITY, &e))?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let entry = Entry {
        n_classes: config.class_breaks().n_classes(),
        config,
        status: Status::Draft,
        summary: None,
        sensitivity: None,
        error: None,
        out_dir: state.runs_dir.join(&id),
    };
    state.scenarios.lock().unwrap().insert(id.clone(), entry);
    Ok((StatusCode::CREATED, Json(json!({ "id": id, "status": Status::Draft }))))
}

async fn run_scenario(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let (config, out_dir) = {
        let mut map = state.scenarios.lock().unwrap();
        let entry = map.get_mut(&id).ok_or_else(|| ApiError::not_found(&id))?;
        if entry.status != Status::Draft {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                format!("scenario {id} is {:?}, only drafts can run", entry.status).to_lowercase(),
            ));
        }
        entry.status = Status::Running;
        (entry.config.clone(), entry.out_dir.clone())
    };
    let task_state = state.clone();
    let task_id = id.clone();
    tokio::spawn(async move {
        let permit = task_state.queue.clone().acquire_owned().await;
        let root = task_state.data_root.clone();
        let outcome = tokio::task::spawn_blocking(move || {
            let opts = LoadOptions {
                override_cr: false,
                sandbox: Some(root.clone()),
            };
            let loaded = pipeline::build_scenario(config, &root, &opts)?;
            pipeline::run(&loaded, &out_dir)
        })
        .await;
        drop(permit);
        let mut map = task_state.scenarios.lock().unwrap();
        let Some(entry) = map.get_mut(&task_id) else { return };
        match outcome {
            Ok(Ok(output)) => {
                entry.summary = Some(output.summary);
                entry.sensitivity = Some(output.sensitivity);
                entry.status = Status::Done;
            }
            Ok(Err(e)) => {
                log::warn!("scenario {task_id} failed: {e}");
                entry.error = Some(e.to_string());
                entry.status = Status::Failed;
            }
            Err(join) => {
                entry.error = Some(format!("run aborted: {join}"));
                entry.status = Status::Failed;
            }
        }
    });
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({ "id": id, "status": Status::Running })),
    ))
}

async fn get_scenario(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let map = state.scenarios.lock().unwrap();
    let entry = map.get(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let mut body = json!({ "id": id, "status": entry.status, "name": entry.config.name });
    if let Some(s) = &entry.summary {
        body["summary"] = json!(s);
    }
    if let Some(e) = &entry.error {
        body["error"] = json!(e);
    }
    Ok(Json(body))
}

/// Output directory of a finished scenario.
fn finished(state: &AppState, id: &str) -> Result<(PathBuf, Option<Vec<SensitivityRow>>, usize), ApiError> {
    let map = state.scenarios.lock().unwrap();
    let entry = map.get(id).ok_or_else(|| ApiError::not_found(id))?;
    if entry.status != Status::Done {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("scenario {id} has no results yet ({:?})", entry.status).to_lowercase(),
        ));
    }
    Ok((entry.out_dir.clone(), entry.sensitivity.clone(), entry.n_classes))
}

async fn get_map(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let (dir, _, _) = finished(&state, &id)?;
    let bytes = tokio::fs::read(dir.join("class_map.png"))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("reading class map: {e}")))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

async fn get_sensitivity(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let (_, rows, n_classes) = finished(&state, &id)?;
    Ok(Json(
        json!({ "n_classes": n_classes, "rows": rows.unwrap_or_default() }),
    ))
}

/// Views a finished run's summary; used by tests comparing front ends.
pub fn summary_of(state: &AppState, id: &str) -> Option<RunSummary> {
    state.scenarios.lock().unwrap().get(id).and_then(|e| e.summary.clone())
}

/// Directory holding a scenario's artifacts.
pub fn output_dir_of(state: &AppState, id: &str) -> Option<PathBuf> {
    state.scenarios.lock().unwrap().get(id).map(|e| e.out_dir.clone())
}
