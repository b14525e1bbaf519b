use std::io;

use thiserror::Error;

/// Errors produced across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("format error at {location}: {message}")]
    Format { location: String, message: String },

    #[error("unknown label `{label}` at {location}")]
    Label { location: String, label: String },

    #[error("duplicate id `{0}`")]
    Duplicate(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn format(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            location: location.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
