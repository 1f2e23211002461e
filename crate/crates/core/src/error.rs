use thiserror::Error;

/// Errors produced by the toolkit.
///
/// Variants are grouped so the CLI can map them onto exit codes: input and
/// data problems exit with 2, numerical failures with 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("quadrature did not converge: {message} (partial sum {partial:.6e}, error estimate {error_estimate:.3e})")]
    Quadrature {
        message: String,
        partial: f64,
        error_estimate: f64,
    },

    #[error("no root in bracket [{lo:.3e}, {hi:.3e}] s: {message}")]
    NoRoot { lo: f64, hi: f64, message: String },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("solver diverged after {iterations} iterations (last residual {residual:.3e}): {message}")]
    Divergence {
        iterations: usize,
        residual: f64,
        message: String,
        history: Vec<f64>,
    },

    #[error("indeterminate: {0}")]
    Indeterminate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    /// True for failures of an iterative or numerical method, as opposed to
    /// bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Quadrature { .. }
                | Error::NoRoot { .. }
                | Error::Fit(_)
                | Error::Divergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
