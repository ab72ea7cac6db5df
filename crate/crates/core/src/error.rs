use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every layer of the laboratory.
#[derive(Debug, Error)]
pub enum GapError {
    /// Caller violated a precondition (bad sizes, bad parameters).
    #[error("usage error: {0}")]
    Usage(String),

    /// The inclusion geometry is not admissible.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// A matrix that must be positive definite is not.
    #[error("setup error: {0}")]
    Setup(String),

    /// An iterative method stopped before reaching its tolerance.
    #[error("{what} did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence {
        what: &'static str,
        residual: f64,
        iterations: usize,
    },

    /// A computed quantity failed a numerical acceptance check.
    #[error("numerical failure: {message} (residual {residual:.3e})")]
    Numerical { message: String, residual: f64 },

    /// The hypotheses of the requested check do not hold for this input.
    #[error("inapplicable: {0}")]
    Inapplicable(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input at {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, GapError>;

impl GapError {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        GapError::Usage(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GapError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by bad input rather than by the numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            GapError::Usage(_)
                | GapError::Geometry(_)
                | GapError::Io { .. }
                | GapError::Parse { .. }
        )
    }
}
