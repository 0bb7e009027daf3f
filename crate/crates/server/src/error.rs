use arena_core::{EngineError, Episode};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

/// Error body returned by every endpoint. `budget_remaining` and `month`
/// describe the session after the failed request, when there is one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    pub message: String,
    pub budget_remaining: Option<u32>,
    pub month: Option<u32>,
}

impl ApiError {
    pub fn session_not_found(id: &str) -> Self {
        ApiError {
            status: StatusCode::NOT_FOUND,
            code: "session_not_found".into(),
            message: format!("no session '{id}'"),
            budget_remaining: None,
            month: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "invalid_request".into(),
            message: message.into(),
            budget_remaining: None,
            month: None,
        }
    }

    /// An engine error with no session context.
    pub fn bare(err: EngineError) -> Self {
        ApiError {
            status: status_for(&err),
            code: err.code().into(),
            message: err.to_string(),
            budget_remaining: None,
            month: None,
        }
    }

    pub fn engine(err: EngineError, episode: &Episode) -> Self {
        ApiError {
            budget_remaining: Some(episode.budget_remaining()),
            month: Some(episode.month()),
            ..ApiError::bare(err)
        }
    }
}

fn status_for(err: &EngineError) -> StatusCode {
    match err {
        EngineError::ScenarioNotFound(_) => StatusCode::NOT_FOUND,
        EngineError::InvalidRequest(_) | EngineError::OutOfRange { .. } => StatusCode::BAD_REQUEST,
        EngineError::BadAssumptions(_) | EngineError::NonPositiveAmount => {
            StatusCode::UNPROCESSABLE_ENTITY
        }
        EngineError::BudgetExhausted { .. } => StatusCode::TOO_MANY_REQUESTS,
        EngineError::EpisodeOver
        | EngineError::NotStarted
        | EngineError::SecondAction
        | EngineError::ContractViolation(_) => StatusCode::CONFLICT,
        EngineError::ReplayMismatch(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}
