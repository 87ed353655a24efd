use thiserror::Error;

/// Errors surfaced by the simulator, networks, agents and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("capability exceeded: {0}")]
    Capability(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("statistics error: {0}")]
    Statistics(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("shape mismatch: checkpoint expects {expected} inputs, scenario provides {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
