use thiserror::Error;

use crate::grid::TileId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value is outside the range its type or wire contract allows.
    #[error("{message}")]
    Validation { parameter: Option<String>, message: String },

    /// A well-formed value falls outside the served geographic domain.
    #[error("{message}")]
    Domain { parameter: Option<String>, message: String },

    #[error("{0} not found")]
    NotFound(String),

    #[error("{0}")]
    State(String),

    #[error("failed to decode tile {tile}: {message}")]
    Render { tile: TileId, message: String },

    #[error("image codec error: {0}")]
    Codec(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn validation(parameter: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation { parameter: Some(parameter.into()), message: message.into() }
    }

    pub fn domain(parameter: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Domain { parameter: Some(parameter.into()), message: message.into() }
    }

    /// Name of the offending request parameter, if one is known.
    pub fn parameter(&self) -> Option<&str> {
        match self {
            Error::Validation { parameter, .. } | Error::Domain { parameter, .. } => parameter.as_deref(),
            _ => None,
        }
    }
}

impl From<image::ImageError> for Error {
    fn from(err: image::ImageError) -> Self {
        Error::Codec(err.to_string())
    }
}
