use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {field}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        field: String,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("insufficient data for {what}: need {need}, got {got}")]
    InsufficientData {
        what: String,
        need: String,
        got: String,
    },

    #[error("no beats: {0}")]
    NoBeats(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("incompatible model file {path}: format version {found}, expected {expected}")]
    ModelVersion {
        path: PathBuf,
        found: u64,
        expected: u64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn insufficient(
        what: impl Into<String>,
        need: impl ToString,
        got: impl ToString,
    ) -> Self {
        Error::InsufficientData {
            what: what.into(),
            need: need.to_string(),
            got: got.to_string(),
        }
    }

    /// Coarse classification used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            _ => ErrorKind::Validation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
}
