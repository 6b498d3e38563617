use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use thiserror::Error;
use venuetrace_core::model::Violation;
use venuetrace_core::qr::QrError;
use venuetrace_ledger::federated::QueryError;
use venuetrace_ledger::silo::ReplicateError;

use crate::pow::PowError;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("unauthorized: {0}")]
    Unauthorized(String),
    #[error("role {0} may not call this endpoint")]
    Forbidden(&'static str),
    #[error(transparent)]
    Pow(#[from] PowError),
    #[error("malformed QR code: {0}")]
    MalformedQr(#[from] QrError),
    #[error("unknown record handle")]
    UnknownHandle,
    #[error("answers violate {} questionnaire rule(s)", .0.len())]
    ValidationFailed(Vec<Violation>),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Replicate(#[from] ReplicateError),
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Serialize)]
pub struct ErrorBody {
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violations: Option<Vec<Violation>>,
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest(_) | ApiError::MalformedQr(_) => StatusCode::BAD_REQUEST,
            ApiError::Unauthorized(_) | ApiError::Pow(_) => StatusCode::UNAUTHORIZED,
            ApiError::Forbidden(_) => StatusCode::FORBIDDEN,
            ApiError::UnknownHandle => StatusCode::NOT_FOUND,
            ApiError::ValidationFailed(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Query(QueryError::UnknownVenue(_)) => StatusCode::NOT_FOUND,
            ApiError::Query(_) => StatusCode::BAD_REQUEST,
            ApiError::Replicate(ReplicateError::UnknownSilo(_)) | ApiError::Internal(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
            ApiError::Replicate(_) => StatusCode::SERVICE_UNAVAILABLE,
        }
    }

    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            ApiError::BadRequest(_) => "bad_request",
            ApiError::Unauthorized(_) | ApiError::Forbidden(_) => "unauthorized",
            ApiError::Pow(PowError::Expired) => "expired",
            ApiError::Pow(PowError::Replay) => "replay",
            ApiError::Pow(PowError::InsufficientWork { .. }) => "insufficient_work",
            ApiError::MalformedQr(_) => "malformed_qr",
            ApiError::UnknownHandle => "unknown_handle",
            ApiError::ValidationFailed(_) => "validation_failed",
            ApiError::Query(QueryError::UnknownVenue(_)) => "unknown_venue",
            ApiError::Query(QueryError::InvalidWindow) => "invalid_window",
            ApiError::Query(QueryError::InvalidGroupField(_)) => "invalid_group_field",
            ApiError::Query(QueryError::InvalidFilter(_)) => "invalid_filter",
            ApiError::Replicate(ReplicateError::NoQuorum { .. }) => "no_quorum",
            ApiError::Replicate(ReplicateError::Timeout { .. }) => "timeout",
            ApiError::Replicate(ReplicateError::UnknownSilo(_)) | ApiError::Internal(_) => "internal",
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let violations = match &self {
            ApiError::ValidationFailed(v) => Some(v.clone()),
            _ => None,
        };
        let body = ErrorBody { error: self.code(), message: self.to_string(), violations };
        (self.status(), Json(body)).into_response()
    }
}
