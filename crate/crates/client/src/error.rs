use std::fmt;

use serde::{Deserialize, Serialize};

/// Error category reported by the service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Validation,
    NotFound,
    Domain,
    Internal,
}

impl ErrorCode {
    pub fn from_wire(s: &str) -> Option<Self> {
        match s.trim() {
            "validation" => Some(ErrorCode::Validation),
            "not_found" => Some(ErrorCode::NotFound),
            "domain" => Some(ErrorCode::Domain),
            "internal" => Some(ErrorCode::Internal),
            _ => None,
        }
    }

    /// Best guess from an HTTP status when the body carries no code.
    pub fn from_status(status: u16) -> Self {
        match status {
            404 => ErrorCode::NotFound,
            422 => ErrorCode::Domain,
            400..=499 => ErrorCode::Validation,
            _ => ErrorCode::Internal,
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorCode::Validation => "validation",
            ErrorCode::NotFound => "not_found",
            ErrorCode::Domain => "domain",
            ErrorCode::Internal => "internal",
        })
    }
}

/// A failure reported by the service itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(rename_all = "PascalCase")]
#[error("{code}: {message}")]
pub struct ServiceError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default)]
    pub parameter: Option<String>,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ClientError {
    /// No response after every attempt.
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error(transparent)]
    Service(#[from] ServiceError),
    /// The response arrived but could not be understood.
    #[error("cannot decode response: {0}")]
    Decode(String),
    #[error("invalid request: {0}")]
    Invalid(String),
}

impl ClientError {
    pub fn service_code(&self) -> Option<ErrorCode> {
        match self {
            ClientError::Service(e) => Some(e.code),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;
