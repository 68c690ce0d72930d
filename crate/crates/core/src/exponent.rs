//! Miss-probability error exponent of the fixed-level Neyman-Pearson
//! detector, in nats per sample.
//!
//! Two independent routes are provided: the closed form built from the
//! steady-state innovations variances,
//! `K = ½ log(Re/σ²) + ½ R̃e/Re − ½`, and the spectral route, the mean over
//! frequency of the Gaussian divergence `D(N(0, S0(ω)) ‖ N(0, S1(ω)))`.
//! For the scalar model the module also gives the analytic slope `∂K/∂a`,
//! the stationarity function whose root is the optimal correlation, and the
//! high-SNR asymptote.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Model, ScalarModel};
use crate::quadrature::{self, PeriodicMean};
use crate::steady_state::{self, SolverDiagnostics};

/// Default starting node count for the spectral route.
pub const DEFAULT_NODES: usize = 1024;
/// Relative change between doublings accepted by the spectral route.
pub const SPECTRAL_TOL: f64 = 1e-10;
/// Above this correlation the spectral integrand is too peaked to trust.
pub const MAX_SPECTRAL_CORRELATION: f64 = 0.999;

/// Bisection stops below this bracket width.
pub const BISECTION_WIDTH: f64 = 1e-10;
/// Resolution of the grid that seeds root brackets.
pub const SEED_GRID_STEP: f64 = 1e-3;
/// Half-width of the local-maximum confirmation.
pub const LOCAL_MAX_STEP: f64 = 1e-4;

/// `D(N(0, σ²) ‖ N(0, σ²(1 + x)))` for a signal-to-noise spectral ratio
/// `x ≥ 0`.
pub fn gaussian_divergence(x: f64) -> f64 {
    0.5 * x.ln_1p() - 0.5 * x / (1.0 + x)
}

/// Closed-form exponent from the steady-state innovations variances.
/// Exactly zero at `a = 1`.
pub fn error_exponent_closed(model: &Model) -> Result<f64> {
    if model.is_degenerate() {
        return Ok(0.0);
    }
    let ss = steady_state::innovation_variances(model)?;
    Ok(closed_form(model.sigma2(), ss.re, ss.re_tilde))
}

fn closed_form(sigma2: f64, re: f64, re_tilde: f64) -> f64 {
    // ½ log(1 + (Re − σ²)/σ²) + ½ (R̃e − Re)/Re, arranged to keep precision
    // at small SNR.
    let k = 0.5 * ((re - sigma2) / sigma2).ln_1p() + 0.5 * (re_tilde - re) / re;
    k.max(0.0)
}

/// Spectral-route exponent by periodic trapezoidal quadrature, doubling from
/// `start_nodes` (a power of two, at least 64).
pub fn error_exponent_spectral(model: &Model, start_nodes: usize) -> Result<PeriodicMean> {
    if start_nodes < 64 || !start_nodes.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "spectral route needs a power-of-two node count >= 64, got {start_nodes}"
        )));
    }
    if let Model::Scalar(m) = model {
        if m.is_degenerate() {
            return Err(Error::DegenerateSpectrum(
                "a = 1 has no spectral density; use the closed form".into(),
            ));
        }
        if m.a() > MAX_SPECTRAL_CORRELATION {
            return Err(Error::DegenerateSpectrum(format!(
                "a = {} exceeds {MAX_SPECTRAL_CORRELATION}; quadrature is unreliable, use the closed form",
                m.a()
            )));
        }
    }
    let sigma2 = model.sigma2();
    quadrature::periodic_mean(
        |w| Ok(gaussian_divergence(model.signal_spectrum(w)? / sigma2)),
        start_nodes,
        SPECTRAL_TOL,
    )
}

/// `r_e = Re/σ²` as a function of `(a, Γ)`:
/// `(√((1 + a² + Q̃)² − 4a²) + 1 + a² + Q̃) / 2` with `Q̃ = Γ(1 − a²)`.
pub fn normalized_innovation_variance(gamma: f64, a: f64) -> f64 {
    let qt = gamma * (1.0 - a * a);
    let s = 1.0 + a * a + qt;
    // (s − 2a)(s + 2a) without the cancellation near a = 1.
    let disc = ((1.0 - a) * (1.0 - a) + qt) * ((1.0 + a) * (1.0 + a) + qt);
    0.5 * (disc.sqrt() + s)
}

/// Analytic `∂K/∂a` at fixed SNR:
/// `Γ(b − a)/(r_e(1 − b²)) · (1/(1 − ab) − 2(1 − ab)/(r_e(1 − b²)²))`,
/// `b = a/r_e`. Defined on `0 ≤ a < 1`.
pub fn exponent_derivative(model: &ScalarModel) -> Result<f64> {
    if model.is_degenerate() {
        return Err(Error::DegenerateSpectrum(
            "the exponent slope is defined only for a < 1".into(),
        ));
    }
    let gamma = model.snr();
    let ss = steady_state::innovation_variances(&(*model).into())?;
    let re = ss.re / model.sigma2();
    let a = model.a();
    let b = a / re;
    let one_b2 = 1.0 - b * b;
    let one_ab = 1.0 - a * b;
    Ok(gamma * (b - a) / (re * one_b2) * (1.0 / one_ab - 2.0 * one_ab / (re * one_b2 * one_b2)))
}

/// `f_Γ(a) = (1 + Q̃ + a²)² − 2 r_e (1 + a⁴/r_e²)`, `Q̃ = Γ(1 − a²)`.
///
/// On `0 < a < 1` its sign is opposite to that of `∂K/∂a`.
pub fn stationarity_function(gamma: f64, a: f64) -> f64 {
    let qt = gamma * (1.0 - a * a);
    let re = normalized_innovation_variance(gamma, a);
    let s = 1.0 + qt + a * a;
    let a4 = a * a * a * a;
    s * s - 2.0 * re * (1.0 + a4 / (re * re))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalCorrelation {
    pub a_star: f64,
    pub k_at_star: f64,
    /// Final bisection bracket width (0 on the `Γ ≥ 1` boundary branch).
    pub bracket: f64,
}

fn exponent_at(gamma: f64, a: f64) -> Result<f64> {
    error_exponent_closed(&ScalarModel::from_snr(a, gamma)?.into())
}

/// Correlation maximizing `K` at SNR `gamma`. For `Γ ≥ 1` the maximum is at
/// `a = 0`; below, every `−→+` sign change of `f_Γ` on a seed grid is
/// bisected and the root with the largest exponent wins.
pub fn optimal_correlation(gamma: f64) -> Result<OptimalCorrelation> {
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "SNR must be > 0, got {gamma}"
        )));
    }
    if gamma >= 1.0 {
        return Ok(OptimalCorrelation {
            a_star: 0.0,
            k_at_star: exponent_at(gamma, 0.0)?,
            bracket: 0.0,
        });
    }

    let f = |a: f64| stationarity_function(gamma, a);
    let seeds = seed_grid();
    let values: Vec<f64> = seeds.iter().map(|&a| f(a)).collect();

    let mut best: Option<OptimalCorrelation> = None;
    for i in 1..seeds.len() {
        if !(values[i - 1] < 0.0 && values[i] > 0.0) {
            continue;
        }
        let (mut lo, mut hi) = (seeds[i - 1], seeds[i]);
        while hi - lo >= BISECTION_WIDTH {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let a_star = 0.5 * (lo + hi);
        let k = exponent_at(gamma, a_star)?;
        let step = LOCAL_MAX_STEP.min(0.5 * (1.0 - a_star));
        let left = exponent_at(gamma, (a_star - step).max(0.0))?;
        let right = exponent_at(gamma, a_star + step)?;
        if k < left || k < right {
            return Err(Error::NumericalDefect(format!(
                "stationary point a = {a_star} of f_Gamma is not a local maximum of K"
            )));
        }
        if best.is_none_or(|b| k > b.k_at_star) {
            best = Some(OptimalCorrelation {
                a_star,
                k_at_star: k,
                bracket: hi - lo,
            });
        }
    }
    best.ok_or_else(|| {
        Error::NumericalDefect(format!(
            "f_Gamma has no sign change on (0, 1) for Gamma = {gamma}"
        ))
    })
}

/// `k · 10⁻³` for `k = 0..999`, then `1 − 10^(−t)` for `t = 3.25, 3.5, …, 12`
/// to reach optima that crowd against `a = 1` at very low SNR.
fn seed_grid() -> Vec<f64> {
    let steps = (1.0 / SEED_GRID_STEP).round() as usize;
    let mut seeds: Vec<f64> = (0..steps).map(|k| k as f64 * SEED_GRID_STEP).collect();
    seeds.extend((13..=48).map(|q| 1.0 - 10f64.powf(-(q as f64) * 0.25)));
    seeds
}

/// High-SNR form `½ log(1 + Γ(1 − a²)) + ½ (1 + a²)/(1 + Γ(1 − a²)) − ½`.
pub fn high_snr_asymptote(model: &ScalarModel) -> Result<f64> {
    if model.is_degenerate() {
        return Err(Error::DegenerateSpectrum(
            "the asymptote needs a < 1".into(),
        ));
    }
    let a2 = model.a() * model.a();
    let eff = model.snr() * (1.0 - a2);
    Ok(0.5 * eff.ln_1p() + 0.5 * (1.0 + a2) / (1.0 + eff) - 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentDiagnostics {
    pub quadrature_nodes: Option<usize>,
    pub quadrature_change: Option<f64>,
    pub solver: SolverDiagnostics,
}

/// Both routes and the scalar slope for one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentReport {
    pub snr: f64,
    pub degenerate: bool,
    pub k_closed: f64,
    /// `None` when the spectral route refuses the model (`a > 0.999`).
    pub k_spectral: Option<f64>,
    /// Scalar models with `a < 1` only.
    pub dk_da: Option<f64>,
    pub p: f64,
    pub re: f64,
    pub re_tilde: f64,
    pub diagnostics: ExponentDiagnostics,
}

pub fn exponent_report(model: &Model, start_nodes: usize) -> Result<ExponentReport> {
    let ss = steady_state::innovation_variances(model)?;
    let degenerate = model.is_degenerate();
    let k_closed = error_exponent_closed(model)?;
    let spectral = match error_exponent_spectral(model, start_nodes) {
        Ok(r) => Some(r),
        Err(Error::DegenerateSpectrum(_)) => None,
        Err(e) => return Err(e),
    };
    let dk_da = match model {
        Model::Scalar(m) if !degenerate => Some(exponent_derivative(m)?),
        _ => None,
    };
    Ok(ExponentReport {
        snr: model.snr(),
        degenerate,
        k_closed,
        k_spectral: spectral.map(|r| r.value),
        dk_da,
        p: ss.observed_p(model),
        re: ss.re,
        re_tilde: ss.re_tilde,
        diagnostics: ExponentDiagnostics {
            quadrature_nodes: spectral.map(|r| r.nodes),
            quadrature_change: spectral.map(|r| r.last_change),
            solver: ss.diagnostics,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn k(a: f64, gamma: f64) -> f64 {
        exponent_at(gamma, a).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        // Stein reduction at a = 0: ½ ln 11 + 1/22 − ½.
        let stein = 0.5 * 11f64.ln() + 1.0 / 22.0 - 0.5;
        assert_relative_eq!(k(0.0, 10.0), stein, epsilon = 1e-14);
        assert_relative_eq!(stein, 0.744_402_181_853_730_7, epsilon = 1e-15);
        assert_eq!(k(1.0, 10.0), 0.0);
        assert_eq!(k(1.0, 0.3), 0.0);
        assert_relative_eq!(k(0.5, 1.0), 0.095_399_007_236_326, epsilon = 1e-13);
        assert_eq!(k(0.4, 0.0), 0.0);
    }

    #[test]
    fn spectral_examples() {
        let flat: Model = ScalarModel::from_snr(0.0, 10.0).unwrap().into();
        let r = error_exponent_spectral(&flat, 64).unwrap();
        assert_relative_eq!(r.value, k(0.0, 10.0), epsilon = 1e-14);
        let m: Model = ScalarModel::from_snr(0.5, 1.0).unwrap().into();
        let r = error_exponent_spectral(&m, DEFAULT_NODES).unwrap();
        assert!((r.value - 0.095_399_007_236_326).abs() < 1e-10);
        let v: Model = ScalarModel::from_snr(0.5, 1.0)
            .unwrap()
            .to_vector()
            .unwrap()
            .into();
        let rv = error_exponent_spectral(&v, DEFAULT_NODES).unwrap();
        assert!((rv.value - r.value).abs() < 1e-9);
    }

    #[test]
    fn spectral_refuses_degenerate() {
        let m: Model = ScalarModel::from_snr(1.0, 1.0).unwrap().into();
        assert!(matches!(
            error_exponent_spectral(&m, 1024),
            Err(Error::DegenerateSpectrum(_))
        ));
        let m: Model = ScalarModel::from_snr(0.9995, 1.0).unwrap().into();
        assert!(matches!(
            error_exponent_spectral(&m, 1024),
            Err(Error::DegenerateSpectrum(_))
        ));
        let m: Model = ScalarModel::from_snr(0.5, 1.0).unwrap().into();
        assert!(error_exponent_spectral(&m, 100).is_err());
        assert!(error_exponent_spectral(&m, 32).is_err());
    }

    #[test]
    fn normalized_innovation_matches_steady_state() {
        for &a in &[0.0, 0.3, 0.7, 0.95, 0.999] {
            for &g in &[0.05, 1.0, 20.0] {
                let m = ScalarModel::from_snr(a, g).unwrap();
                let ss = steady_state::innovation_variances(&m.into()).unwrap();
                assert_relative_eq!(
                    normalized_innovation_variance(g, a),
                    ss.re,
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(
            exponent_derivative(&ScalarModel::from_snr(0.0, 3.0).unwrap()).unwrap(),
            0.0
        );
        let d = exponent_derivative(&ScalarModel::from_snr(0.5, 10.0).unwrap()).unwrap();
        assert!(d < 0.0);
        let h = 1e-6;
        let fd = (k(0.5 + h, 10.0) - k(0.5 - h, 10.0)) / (2.0 * h);
        assert!((d - fd).abs() < 1e-5);
        let d = exponent_derivative(&ScalarModel::from_snr(0.1, 0.5).unwrap()).unwrap();
        let fd = (k(0.1 + h, 0.5) - k(0.1 - h, 0.5)) / (2.0 * h);
        assert!(d > 0.0);
        assert!((d - fd).abs() < 1e-5, "{d} vs {fd}");
        assert!(exponent_derivative(&ScalarModel::from_snr(1.0, 0.5).unwrap()).is_err());
    }

    #[test]
    fn stationarity_examples() {
        for &g in &[0.1, 0.5, 1.0, 2.0, 10.0] {
            assert_relative_eq!(stationarity_function(g, 0.0), g * g - 1.0, epsilon = 1e-12);
        }
        assert_eq!(stationarity_function(1.0, 0.0), 0.0);
        let h = 1e-6;
        let fd = (k(0.9 + h, 0.5) - k(0.9 - h, 0.5)) / (2.0 * h);
        let f = stationarity_function(0.5, 0.9);
        assert!(f * fd < 0.0, "f={f} slope={fd}");
    }

    #[test]
    fn optimal_correlation_examples() {
        let o = optimal_correlation(2.0).unwrap();
        assert_eq!(o.a_star, 0.0);
        assert_relative_eq!(o.k_at_star, k(0.0, 2.0));
        let o = optimal_correlation(1e-3).unwrap();
        assert!(o.a_star > 0.9, "{o:?}");
        let o = optimal_correlation(0.5).unwrap();
        assert!(o.a_star > 0.0 && o.a_star < 1.0);
        assert!(o.bracket < BISECTION_WIDTH);
        let argmax = (0..10_000)
            .map(|i| i as f64 / 10_000.0)
            .max_by(|x, y| k(*x, 0.5).total_cmp(&k(*y, 0.5)))
            .unwrap();
        assert!((o.a_star - argmax).abs() < 1e-3);
        assert!(optimal_correlation(0.0).is_err());
    }

    #[test]
    fn asymptote_examples() {
        let m = ScalarModel::from_snr(0.0, 10.0).unwrap();
        assert_relative_eq!(
            high_snr_asymptote(&m).unwrap(),
            k(0.0, 10.0),
            epsilon = 1e-14
        );
        let m = ScalarModel::from_snr(0.5, 1e4).unwrap();
        let kk = k(0.5, 1e4);
        assert!((kk - high_snr_asymptote(&m).unwrap()).abs() / kk < 0.01);
        let a = (-1f64).exp();
        let diffs: Vec<f64> = (0..12)
            .map(|j| {
                let g = 2f64.powi(j);
                k(a, 2.0 * g) - k(a, g)
            })
            .collect();
        let last = *diffs.last().unwrap();
        assert!((last - 0.5 * 2f64.ln()).abs() < 1e-2, "{diffs:?}");
        assert!((last - 0.5 * 2f64.ln()).abs() < (diffs[2] - 0.5 * 2f64.ln()).abs());
    }

    #[test]
    fn report_collects_both_routes() {
        let r = exponent_report(
            &ScalarModel::from_snr(0.5, 1.0).unwrap().into(),
            DEFAULT_NODES,
        )
        .unwrap();
        assert!(!r.degenerate);
        assert!((r.k_closed - r.k_spectral.unwrap()).abs() < 1e-10);
        assert!(r.dk_da.is_some());
        let r = exponent_report(
            &ScalarModel::from_snr(1.0, 1.0).unwrap().into(),
            DEFAULT_NODES,
        )
        .unwrap();
        assert!(r.degenerate && r.k_closed == 0.0 && r.k_spectral.is_none() && r.dk_da.is_none());
    }
}
