//! Request handlers. Bodies are parsed by hand so malformed JSON maps onto
//! the service's own error shape.

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::Json;
use prefxfer_core::formats::RatingsRecord;
use prefxfer_core::ActionId;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::session::{ActionOutcome, Export, Phase, StepView};
use crate::AppState;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("invalid body: {e}")))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub canonical_task_id: Option<String>,
    pub actual_task_id: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Created {
    pub session_id: String,
    pub phase: Phase,
}

pub async fn create_session(
    State(app): State<AppState>,
    body: Bytes,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let req: CreateSession = if body.iter().all(u8::is_ascii_whitespace) {
        CreateSession::default()
    } else {
        parse_body(&body)?
    };
    let (session_id, phase) = app.create_session(
        req.canonical_task_id.as_deref(),
        req.actual_task_id.as_deref(),
    )?;
    Ok((StatusCode::CREATED, Json(Created { session_id, phase })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scale {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rating {
    pub action: ActionId,
    pub physical: f64,
    pub mental: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitRatings {
    pub task_id: String,
    pub scale: Scale,
    pub ratings: Vec<Rating>,
}

#[derive(Debug, Serialize)]
pub struct PhaseOnly {
    pub phase: Phase,
}

pub async fn submit_ratings(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<PhaseOnly>, ApiError> {
    let req: SubmitRatings = parse_body(&body)?;
    let session = app.session(&id)?;
    let mut raw: Vec<_> = req
        .ratings
        .iter()
        .map(|r| (r.action, r.physical, r.mental))
        .collect();
    raw.sort_by_key(|&(a, _, _)| a);
    let record = RatingsRecord {
        user_id: id,
        task_id: req.task_id,
        scale_min: req.scale.min,
        scale_max: req.scale.max,
        raw,
    };
    let phase = session.lock().unwrap().submit_ratings(record)?;
    Ok(Json(PhaseOnly { phase }))
}

#[derive(Debug, Serialize)]
pub struct StepResponse {
    pub session_id: String,
    #[serde(flatten)]
    pub view: StepView,
}

pub async fn get_step(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<StepResponse>, ApiError> {
    let session = app.session(&id)?;
    let view = session.lock().unwrap().step()?;
    Ok(Json(StepResponse {
        session_id: id,
        view,
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitAction {
    pub action: ActionId,
}

pub async fn submit_action(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<ActionOutcome>, ApiError> {
    let req: SubmitAction = parse_body(&body)?;
    let session = app.session(&id)?;
    let outcome = session.lock().unwrap().submit_action(req.action)?;
    Ok(Json(outcome))
}

pub async fn export(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Export>, ApiError> {
    let session = app.session(&id)?;
    let export = session.lock().unwrap().export();
    Ok(Json(export))
}

#[derive(Debug, Serialize)]
pub struct TaskInfo {
    pub task_id: String,
    pub num_actions: usize,
    pub total_steps: usize,
}

pub async fn list_tasks(State(app): State<AppState>) -> Json<Vec<TaskInfo>> {
    Json(app.task_infos())
}
