//! Thin passthrough to the triage module: every body is the serialised
//! output of a library call.

use std::collections::HashMap;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::Value;
use vitalcam_core::triage::{self, PatientRecord, TriageScore};

use super::vitals::blocking;
use crate::error::ApiError;
use crate::AppState;

pub(crate) async fn list(
    State(state): State<AppState>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    if let Some(key) = params
        .keys()
        .find(|k| !matches!(k.as_str(), "sort" | "name" | "age"))
    {
        return Err(ApiError::bad_request(format!(
            "unknown query parameter {key:?}"
        )));
    }
    let name = params.get("name").filter(|n| !n.trim().is_empty());
    let age = match params.get("age").filter(|a| !a.trim().is_empty()) {
        Some(a) => Some(
            a.trim()
                .parse::<u32>()
                .map_err(|_| ApiError::bad_request(format!("invalid age {a:?}")))?,
        ),
        None => None,
    };
    let records = if name.is_some() || age.is_some() {
        state.store.search(name.map(String::as_str), age)?
    } else {
        state.store.all()
    };
    match params.get("sort").map(String::as_str) {
        None | Some("") => Ok(Json(records).into_response()),
        Some("score") => {
            let ranked = triage::rank_records(&records, &state.triage)?;
            Ok(Json(ranked).into_response())
        }
        Some(other) => Err(ApiError::bad_request(format!(
            "unsupported sort {other:?}; only \"score\""
        ))),
    }
}

pub(crate) async fn get_one(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<PatientRecord>, ApiError> {
    state
        .store
        .get(&id)
        .map(Json)
        .ok_or_else(|| triage::TriageError::NotFound(id).into())
}

pub(crate) async fn score(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<TriageScore>, ApiError> {
    let record = state
        .store
        .get(&id)
        .ok_or(triage::TriageError::NotFound(id))?;
    Ok(Json(triage::score(&record, &state.triage)?))
}

/// Upsert. The path id wins when the body omits one; a conflicting body id
/// is rejected.
pub(crate) async fn put(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<(StatusCode, Json<PatientRecord>), ApiError> {
    let mut value: Value = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("invalid record: {e}")))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| ApiError::bad_request("invalid record: expected a JSON object"))?;
    match obj.get("id") {
        None => {
            obj.insert("id".into(), Value::String(id.clone()));
        }
        Some(Value::String(body_id)) if *body_id == id => {}
        Some(other) => {
            return Err(ApiError::bad_request(format!(
                "body id {other} does not match path id {id:?}"
            )))
        }
    }
    let record: PatientRecord = serde_json::from_value(value)
        .map_err(|e| ApiError::bad_request(format!("invalid record: {e}")))?;
    let store = state.store.clone();
    let outcome = blocking(move || store.upsert(record).map_err(ApiError::from)).await?;
    let status = if outcome.created {
        StatusCode::CREATED
    } else {
        StatusCode::OK
    };
    Ok((status, Json(outcome.record)))
}

pub(crate) async fn delete(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<StatusCode, ApiError> {
    let store = state.store.clone();
    blocking(move || store.delete(&id).map_err(ApiError::from)).await?;
    Ok(StatusCode::NO_CONTENT)
}
