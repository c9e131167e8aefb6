use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::Json;
use serde::Deserialize;
use serde_json::{json, Value};
use uuid::Uuid;
use vitalcam_core::frameio::{self, FrameSequence};
use vitalcam_core::roi::RoiMode;
use vitalcam_core::vitals::{EstimateOptions, Spo2Calibration, VitalKind};

use crate::error::ApiError;
use crate::jobs::VitalsJob;
use crate::AppState;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JobRequest {
    kind: String,
    fps: f64,
    #[serde(default)]
    frames: Option<Vec<String>>,
    #[serde(default)]
    dir: Option<String>,
    #[serde(default)]
    roi: Option<String>,
    #[serde(default)]
    cal: Option<Spo2Calibration>,
}

pub(crate) async fn create_job(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let req: JobRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad_request(format!("invalid job request: {e}")))?;
    let kind: VitalKind = req.kind.parse().map_err(ApiError::bad_request)?;
    if !(req.fps.is_finite() && req.fps > 0.0) {
        return Err(ApiError::bad_request(format!(
            "fps must be positive, got {}",
            req.fps
        )));
    }
    let roi: RoiMode = match &req.roi {
        Some(s) => s
            .parse()
            .map_err(|e: vitalcam_core::roi::RoiError| ApiError::bad_request(e.to_string()))?,
        None => RoiMode::default(),
    };
    let calibration = req.cal.unwrap_or_default();
    calibration
        .validate()
        .map_err(|e| ApiError::bad_request(e.to_string()))?;

    let max_frames = state.config.max_frames;
    let too_many = |n: usize| {
        ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("{n} frames exceeds the limit of {max_frames}"),
        )
    };
    let fps = req.fps;
    let seq = match (req.frames, req.dir) {
        (Some(frames), None) => {
            if frames.len() > max_frames {
                return Err(too_many(frames.len()));
            }
            blocking(move || {
                let decoded = frames
                    .iter()
                    .enumerate()
                    .map(|(i, f)| {
                        frameio::decode_base64_frame(f)
                            .map_err(|e| ApiError::bad_request(format!("frame {i}: {e}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                FrameSequence::new(decoded, fps, "upload")
                    .map_err(|e| ApiError::bad_request(e.to_string()))
            })
            .await?
        }
        (None, Some(dir)) => {
            let seq = blocking(move || {
                frameio::load_sequence(&dir, fps).map_err(|e| ApiError::bad_request(e.to_string()))
            })
            .await?;
            if seq.len() > max_frames {
                return Err(too_many(seq.len()));
            }
            seq
        }
        _ => {
            return Err(ApiError::bad_request(
                "exactly one of \"frames\" or \"dir\" is required",
            ))
        }
    };

    let opts = EstimateOptions {
        roi,
        calibration,
        ..EstimateOptions::default()
    };
    let job_id = state.jobs.submit(kind, seq, opts);
    tracing::info!(%job_id, %kind, "vitals job queued");
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": job_id }))))
}

pub(crate) async fn get_job(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<VitalsJob>, ApiError> {
    Uuid::parse_str(&id)
        .ok()
        .and_then(|id| state.jobs.get(&id))
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("unknown job {id}")))
}

/// Runs CPU or file work off the async threads.
pub(crate) async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker crashed: {e}")))?
}
