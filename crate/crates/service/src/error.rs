use std::fmt;

use serde::{Deserialize, Serialize};

/// Error category reported on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Validation,
    NotFound,
    Domain,
    Internal,
}

impl ErrorCode {
    pub fn http_status(self) -> u16 {
        match self {
            ErrorCode::Validation => 400,
            ErrorCode::NotFound => 404,
            ErrorCode::Domain => 422,
            ErrorCode::Internal => 500,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Validation => "validation",
            ErrorCode::NotFound => "not_found",
            ErrorCode::Domain => "domain",
            ErrorCode::Internal => "internal",
        }
    }

    pub fn from_str_opt(s: &str) -> Option<Self> {
        match s {
            "validation" => Some(ErrorCode::Validation),
            "not_found" => Some(ErrorCode::NotFound),
            "domain" => Some(ErrorCode::Domain),
            "internal" => Some(ErrorCode::Internal),
            _ => None,
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Transport-neutral error body returned by every endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(rename_all = "PascalCase")]
#[error("{code}: {message}")]
pub struct ServiceError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter: Option<String>,
}

impl ServiceError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ServiceError { code, message: message.into(), parameter: None }
    }

    pub fn validation(parameter: &str, message: impl Into<String>) -> Self {
        ServiceError { code: ErrorCode::Validation, message: message.into(), parameter: Some(parameter.to_string()) }
    }

    pub fn missing(parameter: &str) -> Self {
        Self::validation(parameter, format!("missing required parameter {parameter}"))
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::NotFound, message)
    }

    /// Replaces the parameter name, keeping code and message.
    pub fn for_parameter(mut self, parameter: &str) -> Self {
        self.parameter = Some(parameter.to_string());
        self
    }
}

impl From<terra_core::Error> for ServiceError {
    fn from(err: terra_core::Error) -> Self {
        use terra_core::Error as E;
        let parameter = err.parameter().map(str::to_string);
        let (code, message) = match &err {
            E::Validation { message, .. } => (ErrorCode::Validation, message.clone()),
            E::Domain { message, .. } => (ErrorCode::Domain, message.clone()),
            E::NotFound(what) => (ErrorCode::NotFound, format!("{what} not found")),
            E::Render { .. } => (ErrorCode::Internal, err.to_string()),
            E::State(message) => (ErrorCode::Internal, message.clone()),
            E::Codec(_) | E::Io(_) => {
                // Do not leak file system details to callers.
                log::error!("storage failure: {err}");
                (ErrorCode::Internal, "storage failure".to_string())
            }
        };
        ServiceError { code, message, parameter }
    }
}
