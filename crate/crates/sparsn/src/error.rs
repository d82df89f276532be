//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-side contract violation (bad index, point outside domain, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Malformed configuration or unsupported parameter combination.
    #[error("configuration error: {0}")]
    Config(String),

    /// Non-finite or otherwise unusable data encountered while sampling
    /// user-supplied fields.
    #[error("data error: {0}")]
    Data(String),

    /// Inconsistent geometry description.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Discrete well-posedness assumption sigma_t - m*sigma_s > 0 violated.
    /// Carries the worst margin and where it was sampled.
    #[error("well-posedness assumption violated: min(sigma_t - m*sigma_s) = {margin:.6e} at {location}")]
    AssumptionViolated { margin: f64, location: String },

    /// Linear algebra failure (singular block, NaN in iterate, divergence).
    #[error("solver error: {0}")]
    Solver(String),

    /// Loss of rank during basis orthogonalization; indicates a bug or an
    /// unsupported degree, not a user error.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::AssumptionViolated { .. } => 4,
            Error::Solver(_) => 3,
            _ => 1,
        }
    }
}
