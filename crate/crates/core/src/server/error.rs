use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

use crate::error::Error;

/// An error response: `{"error": kind, "message": ...}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self { status, kind, message: message.into() }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, kind) = match &e {
            Error::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            Error::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            Error::Precondition(_) => (StatusCode::CONFLICT, "precondition_failed"),
            Error::Ingest(_) | Error::IngestLine { .. } | Error::Profile(_) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "ingest_error")
            }
            Error::EmptyHistory => (StatusCode::UNPROCESSABLE_ENTITY, "empty_history"),
            Error::Report(_) | Error::Template { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "report_error"),
            Error::Domain(_) | Error::Dimension { .. } | Error::DegenerateVector | Error::Config(_) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "invalid_request")
            }
            Error::Model(_) => (StatusCode::BAD_GATEWAY, "model_error"),
            Error::Embed(_) => (StatusCode::BAD_GATEWAY, "embed_error"),
            Error::KernelStart(_) | Error::KernelProtocol(_) | Error::Kernel(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "kernel_error")
            }
            Error::Io(_) | Error::Json(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal_error"),
        };
        Self { status, kind, message: e.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.kind, "message": self.message }))).into_response()
    }
}
