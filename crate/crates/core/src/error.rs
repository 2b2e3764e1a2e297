use thiserror::Error;

use crate::capacity::CapacityResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input value violates a documented invariant.
    #[error("rejected input: {0}")]
    InvalidInput(String),

    /// A model or run configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("channel reduction failed: {0}")]
    Reduction(String),

    /// Blahut-Arimoto ran out of iterations; the best bracket is attached.
    #[error(
        "capacity iteration did not converge: bracket [{:.9}, {:.9}] after {} iterations",
        .0.capacity_bits,
        .0.capacity_bits + .0.residual,
        .0.iterations
    )]
    NotConverged(Box<CapacityResult>),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
