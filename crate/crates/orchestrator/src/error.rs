use thiserror::Error;

pub type Result<T, E = OrchestratorError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum OrchestratorError {
    /// A message that is malformed or illegal in the session's current phase.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("response database, line {line}: {message}")]
    ResponseDb { line: usize, message: String },

    #[error(transparent)]
    Core(#[from] affect_core::Error),

    #[error("I/O error: {0}")]
    Io(String),
}

impl OrchestratorError {
    pub(crate) fn protocol(msg: impl Into<String>) -> Self {
        OrchestratorError::Protocol(msg.into())
    }
}
