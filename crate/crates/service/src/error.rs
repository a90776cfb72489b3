use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use prefxfer_core::Error as CoreError;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("{0}")]
    WrongPhase(String),
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn status_and_code(&self) -> (StatusCode, &'static str) {
        use CoreError as E;
        match self {
            ApiError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            ApiError::UnknownTask(_) => (StatusCode::NOT_FOUND, "unknown_task"),
            ApiError::WrongPhase(_) => (StatusCode::CONFLICT, "wrong_phase"),
            ApiError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            ApiError::Core(e) => match e {
                E::UnknownAction(_)
                | E::ExhaustedAction { .. }
                | E::PrecedenceViolation { .. }
                | E::TerminalState => (StatusCode::UNPROCESSABLE_ENTITY, "infeasible_action"),
                E::MissingRatings(_) | E::RatingsMismatch { .. } => {
                    (StatusCode::UNPROCESSABLE_ENTITY, "missing_ratings")
                }
                E::RatingOutOfBounds { .. } => {
                    (StatusCode::UNPROCESSABLE_ENTITY, "rating_out_of_bounds")
                }
                E::Format { .. } | E::InvalidConfig(_) => {
                    (StatusCode::UNPROCESSABLE_ENTITY, "invalid_input")
                }
                E::Divergence { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "learning_failed"),
                _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code) = self.status_and_code();
        let body = ErrorBody {
            code,
            message: self.to_string(),
        };
        (status, Json(body)).into_response()
    }
}
