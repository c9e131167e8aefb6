use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::Json;
use serde::{Deserialize, Serialize};
use uuid::Uuid;
use vitalcam_core::dialog::{DialogSession, TranscriptEntry};

use crate::error::ApiError;
use crate::AppState;

/// What a client needs to render the current step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: Uuid,
    pub graph_id: String,
    pub node_id: String,
    pub text: String,
    pub choices: Vec<String>,
    /// The node moves on without a choice.
    pub has_default: bool,
    pub is_checkpoint: bool,
    pub ended: bool,
    pub checkpoints: Vec<String>,
    pub transcript: Vec<TranscriptEntry>,
}

#[derive(Debug)]
pub(crate) struct OpenSession {
    graph_id: String,
    session: DialogSession,
}

fn view(id: Uuid, open: &OpenSession) -> SessionView {
    let s = &open.session;
    let node = s.current_node();
    SessionView {
        session_id: id,
        graph_id: open.graph_id.clone(),
        node_id: s.current().to_string(),
        text: node.text.clone(),
        choices: node.choice_labels().into_iter().map(String::from).collect(),
        has_default: node.default_target.is_some(),
        is_checkpoint: node.is_checkpoint,
        ended: s.is_ended(),
        checkpoints: s.checkpoints().to_vec(),
        transcript: s.transcript().to_vec(),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StartRequest {
    graph_id: String,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct StepRequest {
    #[serde(default)]
    choice: Option<String>,
}

fn parse_body<T: for<'de> Deserialize<'de> + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid body: {e}")))
}

pub(crate) async fn start(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let req: StartRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("invalid body: {e}")))?;
    let graph = state
        .graphs
        .get(&req.graph_id)
        .ok_or_else(|| ApiError::not_found(format!("unknown graph {:?}", req.graph_id)))?;
    let id = Uuid::new_v4();
    let open = OpenSession {
        graph_id: req.graph_id,
        session: DialogSession::start(Arc::clone(graph)),
    };
    let v = view(id, &open);
    state.sessions.lock().insert(id, open);
    Ok((StatusCode::CREATED, Json(v)))
}

fn with_session<T>(
    state: &AppState,
    id: &str,
    f: impl FnOnce(Uuid, &mut OpenSession) -> Result<T, ApiError>,
) -> Result<T, ApiError> {
    let unknown = || ApiError::not_found(format!("unknown session {id}"));
    let uuid = Uuid::parse_str(id).map_err(|_| unknown())?;
    let mut sessions = state.sessions.lock();
    let open = sessions.get_mut(&uuid).ok_or_else(unknown)?;
    f(uuid, open)
}

pub(crate) async fn get(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    with_session(&state, &id, |uuid, open| Ok(Json(view(uuid, open))))
}

pub(crate) async fn step(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let req: StepRequest = parse_body(&body)?;
    with_session(&state, &id, |uuid, open| {
        open.session.step(req.choice.as_deref())?;
        Ok(Json(view(uuid, open)))
    })
}

pub(crate) async fn return_to_checkpoint(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    with_session(&state, &id, |uuid, open| {
        open.session.return_to_checkpoint()?;
        Ok(Json(view(uuid, open)))
    })
}

pub(crate) async fn close(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<StatusCode, ApiError> {
    let unknown = || ApiError::not_found(format!("unknown session {id}"));
    let uuid = Uuid::parse_str(&id).map_err(|_| unknown())?;
    state
        .sessions
        .lock()
        .remove(&uuid)
        .map(|_| StatusCode::NO_CONTENT)
        .ok_or_else(unknown)
}
