use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid grid, potential, scenario or solver parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// API misuse: mismatched grids, unsynchronized times, empty inputs.
    #[error("usage error: {0}")]
    Usage(String),

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual history {history:?})")]
    Convergence { iterations: usize, history: Vec<f64> },

    #[error("projection failure: clipping negative lobes changed the iterate by {change:e} (sup norm)")]
    Projection { change: f64 },

    #[error("ground state is not a constrained local minimum: energy dropped by {drop:e}")]
    NotLocalMinimum { drop: f64 },

    /// NaN/Inf detected or the boundary-mass guard tripped.
    #[error("numerical failure at t = {t}: {reason}")]
    Numerical { t: f64, reason: String },

    #[error("order fit failed: {0}")]
    Fit(String),

    #[error("assertion failed: {0}")]
    Assertion(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Assertion(_) | Error::NotLocalMinimum { .. } => 1,
            Error::Config(_) | Error::Usage(_) | Error::Precondition(_) | Error::Json(_) => 2,
            Error::Convergence { .. }
            | Error::Projection { .. }
            | Error::Numerical { .. }
            | Error::Fit(_) => 3,
            Error::Io(_) | Error::Csv(_) => 2,
        }
    }
}
