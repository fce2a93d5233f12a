use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ServiceError {
    #[error("unknown study {0}")]
    UnknownStudy(String),
    #[error("unknown rater {0}")]
    UnknownRater(String),
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("task {0} was already submitted")]
    DuplicateSubmission(String),
    #[error("{0}")]
    RankNotPermutation(String),
    #[error("{0}")]
    ScoreOutOfRange(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Invalid(String),
    #[error("malformed request body: {0}")]
    BadRequest(String),
    #[error("storage: {0}")]
    Storage(String),
    #[error("event log: {0}")]
    Corrupt(String),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownStudy(_) => "UnknownStudy",
            ServiceError::UnknownRater(_) => "UnknownRater",
            ServiceError::UnknownTask(_) => "UnknownTask",
            ServiceError::DuplicateSubmission(_) => "DuplicateSubmission",
            ServiceError::RankNotPermutation(_) => "RankNotPermutation",
            ServiceError::ScoreOutOfRange(_) => "ScoreOutOfRange",
            ServiceError::Conflict(_) => "Conflict",
            ServiceError::Invalid(_) => "Invalid",
            ServiceError::BadRequest(_) => "BadRequest",
            ServiceError::Storage(_) => "Storage",
            ServiceError::Corrupt(_) => "Corrupt",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownStudy(_) | ServiceError::UnknownRater(_) | ServiceError::UnknownTask(_) => {
                StatusCode::NOT_FOUND
            }
            ServiceError::DuplicateSubmission(_) | ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::RankNotPermutation(_) | ServiceError::ScoreOutOfRange(_) | ServiceError::Invalid(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Storage(_) | ServiceError::Corrupt(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

/// Error response body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = ErrorBody { error: self.code().to_string(), message: self.to_string() };
        (self.status(), Json(body)).into_response()
    }
}
