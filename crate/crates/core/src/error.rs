use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("validation failed at row {row}: {reason}")]
    Validation { row: usize, reason: String },

    #[error("unsupported size: {n} qubits exceeds limit {limit}{hint}")]
    UnsupportedSize { n: usize, limit: usize, hint: String },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("grid too coarse between s={s0} and s={s1}: subspace overlap {overlap:.3} < 0.5, refine the grid")]
    GridRefinement { s0: f64, s1: f64, overlap: f64 },

    #[error("integrator failure at s={s}: {reason}")]
    Integrator { s: f64, reason: String },

    #[error("trace leak {leak:.3e} exceeds tolerance at s={s}")]
    TraceLeak { s: f64, leak: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("all records censored: {0}")]
    Censored(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for this error class: 2 validation, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_)
            | Error::Validation { .. }
            | Error::UnsupportedSize { .. }
            | Error::GridRefinement { .. }
            | Error::Json(_)
            | Error::Csv(_)
            | Error::Io(_) => 2,
            Error::NoConvergence { .. }
            | Error::Integrator { .. }
            | Error::TraceLeak { .. }
            | Error::Numerical(_)
            | Error::Censored(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
