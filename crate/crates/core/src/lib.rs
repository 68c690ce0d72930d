//! Miss-probability error exponents for Gauss-Markov signals observed in
//! white Gaussian noise.
//!
//! A Neyman-Pearson detector at fixed false-alarm level `α` distinguishes
//! `H0: y_i = w_i` from `H1: y_i = hᵀx_i + w_i` where the state follows a
//! stationary Gauss-Markov recursion. Its miss probability decays like
//! `exp(−nK)`; this crate computes `K` in closed form (scalar and vector
//! state), by spectral quadrature, and by simulation.
//!
//! ```
//! use gm_exponent::{error_exponent_closed, Model, ScalarModel};
//!
//! let model: Model = ScalarModel::from_snr(0.5, 1.0).unwrap().into();
//! let k = error_exponent_closed(&model).unwrap();
//! assert!((k - 0.095399007236326).abs() < 1e-12);
//! ```

pub mod cli;
pub mod error;
pub mod exponent;
pub(crate) mod linalg;
pub mod model;
pub mod quadrature;
pub mod sim;
pub mod steady_state;
pub mod streams;

pub use error::{Error, Result};
pub use exponent::{
    error_exponent_closed, error_exponent_spectral, exponent_derivative, exponent_report,
    high_snr_asymptote, optimal_correlation, ExponentReport, OptimalCorrelation,
};
pub use model::{Hypothesis, Model, ModelSpec, ScalarModel, VectorModel};
pub use sim::{estimate_exponent, estimate_miss_probability, SimConfig, SimResult, TrialPlan};
pub use steady_state::{innovation_variances, SteadyState};
pub use streams::{Purpose, StreamFamily, StreamId};
