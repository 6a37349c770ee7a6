use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input text (JSON, CSV) with location context.
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    /// Structurally valid input that references something that does not exist
    /// or violates a domain constraint.
    #[error("invalid {what}: {message}")]
    Invalid { what: &'static str, message: String },

    #[error("unknown interface '{0}'")]
    UnknownInterface(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-finite value during training: {0}")]
    NonFinite(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("schema hash mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },

    #[error("fold {fold} (validation interface {interface}): {source}")]
    Fold {
        fold: usize,
        interface: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, message: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Invalid { .. }
                | Error::UnknownInterface(_)
                | Error::SchemaMismatch { .. }
                | Error::Json(_)
        )
    }
}
