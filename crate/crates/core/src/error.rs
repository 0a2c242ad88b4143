use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("outside the domain: {0}")]
    Domain(String),

    #[error("no admissible Stieltjes branch at z = {z}; roots = {roots:?}")]
    Branch { z: Complex64, roots: Vec<Complex64> },

    #[error("edge Newton iteration did not converge after {iterations} steps (last residual {residual:e})")]
    Convergence {
        iterations: usize,
        residual: f64,
        trajectory: Vec<(f64, f64)>,
    },

    #[error("quadrature did not reach tolerance {tolerance:e} (achieved {achieved:e})")]
    Quadrature { tolerance: f64, achieved: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("index {index} out of range: {reason}")]
    Index { index: usize, reason: String },

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("cache error: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// Process exit code used by the command-line front end.
    ///
    /// Parameter-like failures map to 1, numerical and convergence failures to 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_)
            | Error::Domain(_)
            | Error::Index { .. }
            | Error::Data(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_)
            | Error::Cache(_) => 1,
            Error::Branch { .. }
            | Error::Convergence { .. }
            | Error::Quadrature { .. }
            | Error::Numerical(_)
            | Error::DegenerateSpectrum(_) => 2,
        }
    }
}
