use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// A recurrence coefficient has a vanishing denominator.
    #[error("singular recurrence coefficient at degree {degree}")]
    SingularCoefficient { degree: usize },

    /// `p_t(0) = 0`, so the family cannot be normalized to be residual.
    #[error("degenerate family: p_{degree}(0) = 0, cannot normalize to a residual polynomial")]
    Degenerate { degree: usize },

    #[error("iterates diverged after iteration {last_finite}")]
    Diverged { last_finite: usize },

    #[error("quadrature self-check failed: doubling nodes changed the result by {relative_change:.3e} (relative)")]
    Precision { relative_change: f64 },

    #[error("expected metric is not finite at t = {degree}")]
    Overflow { degree: usize },

    #[error("step coefficients disagree with the residual recurrence at t = {degree}: {detail}")]
    CoefficientMismatch { degree: usize, detail: String },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
