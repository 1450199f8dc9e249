use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A configuration value violates a documented constraint.
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("stratification failed for client {client}: {reason}")]
    Stratification { client: usize, reason: String },
    /// The evaluation set cannot support the requested metric.
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("missing attack types in radar table: {0}")]
    Incomplete(String),
    #[error("power iteration did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
