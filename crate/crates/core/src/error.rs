use thiserror::Error;

/// Errors raised by model construction, the steady-state solvers, the
/// exponent routines and the Monte Carlo harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A model parameter violates a named invariant.
    #[error("invalid model: {invariant}")]
    InvalidModel { invariant: String },

    /// The feedback matrix is not strictly stable.
    #[error("non-stationary model: spectral radius {radius} is not below 1")]
    NonStationary { radius: f64 },

    /// The spectrum is singular (a = 1 at ω = 0, or any quadrature of a
    /// degenerate model).
    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    /// An argument is outside the domain of an operation.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An iterative solver hit its cap.
    #[error(
        "{solver} did not converge after {iterations} iterations (last change {last_change:e})"
    )]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        last_change: f64,
    },

    /// An internal consistency check failed.
    #[error("numerical defect in {0}")]
    NumericalDefect(String),

    /// The Monte Carlo design cannot deliver the requested estimate.
    #[error("simulation infeasible: {0}")]
    SimulationInfeasible(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(invariant: impl Into<String>) -> Self {
        Error::InvalidModel {
            invariant: invariant.into(),
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::InvalidModel { .. }
            | Error::NonStationary { .. }
            | Error::InvalidArgument(_)
            | Error::Json(_)
            | Error::Io(_) => 2,
            Error::DegenerateSpectrum(_)
            | Error::NoConvergence { .. }
            | Error::NumericalDefect(_) => 3,
            Error::SimulationInfeasible(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
