//! Steady-state Kalman quantities for the `H1` model.
//!
//! `P` is the one-step prediction error covariance (stabilizing solution of
//! the algebraic Riccati equation), `Re = σ² + hᵀPh` the innovations
//! variance under `H1`, and `R̃e` the variance of the same whitening filter's
//! output when it is fed `H0` data. The scalar model uses closed forms; the
//! vector model uses a fixed-point Riccati iteration and a Lyapunov solve.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Model, ScalarModel, VectorModel, STABILITY_MARGIN};

/// Riccati iteration stops once successive iterates differ by less than
/// this (absolute-plus-relative, Frobenius).
pub const DARE_STEP_TOL: f64 = 1e-13;
pub const DARE_MAX_ITERATIONS: usize = 200_000;
/// Kronecker solve up to this size, doubling above.
pub const LYAPUNOV_DIRECT_MAX_DIM: usize = 16;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolverDiagnostics {
    pub dare_iterations: usize,
    /// `‖P − Ric(P)‖_F`.
    pub riccati_residual: f64,
    /// `‖P̃ − F P̃ Fᵀ − W‖_F`; zero for the scalar closed form.
    pub lyapunov_residual: f64,
    /// Spectral radius of the closed-loop matrix `A − K_p hᵀ`.
    pub closed_loop_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    /// Prediction error covariance (`1×1` for the scalar model).
    pub p: DMatrix<f64>,
    /// Lyapunov solution `P̃`; only the vector route forms it.
    pub p_tilde: Option<DMatrix<f64>>,
    pub re: f64,
    pub re_tilde: f64,
    /// Steady-state Kalman prediction gain `K_p`.
    pub gain: DVector<f64>,
    pub diagnostics: SolverDiagnostics,
}

impl SteadyState {
    /// `P` as a scalar; for vector models this is `hᵀPh`.
    pub fn observed_p(&self, model: &Model) -> f64 {
        match model {
            Model::Scalar(_) => self.p[(0, 0)],
            Model::Vector(v) => v.h().dot(&(&self.p * v.h())),
        }
    }
}

/// Closed-form steady-state prediction error variance
/// `P = ½√([σ²(1−a²) − Q]² + 4σ²Q) − ½σ²(1−a²) + Q/2`.
pub fn scalar_prediction_variance(model: &ScalarModel) -> f64 {
    let a2 = model.a() * model.a();
    let s2 = model.sigma2();
    let q = model.q();
    let d = s2 * (1.0 - a2);
    let root = ((d - q) * (d - q) + 4.0 * s2 * q).sqrt();
    (0.5 * root - 0.5 * d + 0.5 * q).max(0.0)
}

/// One step of the scalar Riccati recursion, `a²P − a²P²/(P + σ²) + Q`.
pub fn scalar_riccati_map(model: &ScalarModel, p: f64) -> f64 {
    let a2 = model.a() * model.a();
    a2 * p - a2 * p * p / (p + model.sigma2()) + model.q()
}

/// `K_p = aP / (P + σ²)`.
pub fn scalar_kalman_gain(model: &ScalarModel, p: f64) -> f64 {
    model.a() * p / (p + model.sigma2())
}

/// `K_p = A P h / (hᵀ P h + σ²)`.
pub fn kalman_gain(model: &VectorModel, p: &DMatrix<f64>) -> DVector<f64> {
    let ph = p * model.h();
    let re = model.h().dot(&ph) + model.sigma2();
    model.a() * ph / re
}

/// The matrix Riccati map
/// `APAᵀ + BQBᵀ − APhhᵀPAᵀ / (hᵀPh + σ²)`.
pub fn riccati_map(model: &VectorModel, p: &DMatrix<f64>) -> DMatrix<f64> {
    let a = model.a();
    let aph = a * (p * model.h());
    let re = model.h().dot(&(p * model.h())) + model.sigma2();
    a * p * a.transpose() + model.state_noise() - &aph * aph.transpose() / re
}

/// Stabilizing DARE solution with its iteration record.
#[derive(Debug, Clone, PartialEq)]
pub struct DareSolution {
    pub p: DMatrix<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub closed_loop_radius: f64,
}

/// Solves the algebraic Riccati equation by iterating the Riccati map from
/// `B Q Bᵀ`.
pub fn solve_dare(model: &VectorModel) -> Result<DareSolution> {
    let mut p = model.state_noise().clone();
    let mut last_change = f64::INFINITY;
    for iteration in 1..=DARE_MAX_ITERATIONS {
        let mut next = riccati_map(model, &p);
        let drift = linalg::asymmetry(&next);
        if drift > 1e-8 * (1.0 + next.norm()) {
            return Err(Error::NumericalDefect(format!(
                "Riccati iterate asymmetry {drift:e}"
            )));
        }
        linalg::symmetrize(&mut next);
        last_change = (&next - &p).norm();
        p = next;
        if last_change < linalg::scaled_tol(DARE_STEP_TOL, p.norm()) {
            let residual = (&p - riccati_map(model, &p)).norm();
            let gain = kalman_gain(model, &p);
            let closed_loop = model.a() - &gain * model.h().transpose();
            let closed_loop_radius = linalg::spectral_radius(&closed_loop);
            if closed_loop_radius >= 1.0 {
                return Err(Error::NumericalDefect(format!(
                    "Riccati fixed point is not stabilizing (radius {closed_loop_radius})"
                )));
            }
            return Ok(DareSolution {
                p,
                iterations: iteration,
                residual,
                closed_loop_radius,
            });
        }
    }
    Err(Error::NoConvergence {
        solver: "Riccati iteration",
        iterations: DARE_MAX_ITERATIONS,
        last_change,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSolution {
    pub solution: DMatrix<f64>,
    pub residual: f64,
}

/// Solves `X = F X Fᵀ + W` for stable `F`.
pub fn solve_lyapunov(f: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<LyapunovSolution> {
    let n = f.nrows();
    if f.ncols() != n || w.nrows() != n || w.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "Lyapunov operands must be square and conformant, got F {}x{}, W {}x{}",
            f.nrows(),
            f.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    let radius = linalg::spectral_radius(f);
    if radius >= 1.0 - STABILITY_MARGIN {
        return Err(Error::NonStationary { radius });
    }
    let mut x = if n <= LYAPUNOV_DIRECT_MAX_DIM {
        lyapunov_direct(f, w)?
    } else {
        lyapunov_doubling(f, w)?
    };
    linalg::symmetrize(&mut x);
    let residual = (&x - f * &x * f.transpose() - w).norm();
    Ok(LyapunovSolution {
        solution: x,
        residual,
    })
}

/// `(I − F⊗F) vec(X) = vec(W)`.
fn lyapunov_direct(f: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = f.nrows();
    let system = DMatrix::identity(n * n, n * n) - f.kronecker(f);
    let rhs = DVector::from_column_slice(w.as_slice());
    let vec_x = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NumericalDefect("singular Lyapunov system".into()))?;
    Ok(DMatrix::from_column_slice(n, n, vec_x.as_slice()))
}

/// `Σ F^k W F^kᵀ` by squaring.
fn lyapunov_doubling(f: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut x = w.clone();
    let mut power = f.clone();
    for _ in 0..64 {
        let increment = &power * &x * power.transpose();
        let done = increment.norm() < linalg::scaled_tol(1e-16, x.norm());
        x += increment;
        if done {
            return Ok(x);
        }
        power = &power * &power;
    }
    Err(Error::NoConvergence {
        solver: "Lyapunov doubling",
        iterations: 64,
        last_change: f64::NAN,
    })
}

/// Steady-state innovations variances `Re` (under `H1`) and `R̃e` (whitening
/// filter output under `H0`), with the quantities that produce them.
pub fn innovation_variances(model: &Model) -> Result<SteadyState> {
    match model {
        Model::Scalar(m) => Ok(scalar_steady_state(m)),
        Model::Vector(m) => vector_steady_state(m),
    }
}

fn scalar_steady_state(m: &ScalarModel) -> SteadyState {
    let s2 = m.sigma2();
    let a = m.a();
    let p = scalar_prediction_variance(m);
    let re = p + s2;
    // a = 1 gives P = 0 and a 0/0 ratio below; the limit is R̃e = σ².
    let re_tilde = if m.is_degenerate() {
        s2
    } else {
        let denom = p * p + 2.0 * s2 * p + (1.0 - a * a) * s2 * s2;
        s2 * (1.0 + a * a * p * p / denom)
    };
    let gain = scalar_kalman_gain(m, p);
    SteadyState {
        p: DMatrix::from_element(1, 1, p),
        p_tilde: None,
        re,
        re_tilde,
        gain: DVector::from_element(1, gain),
        diagnostics: SolverDiagnostics {
            dare_iterations: 0,
            riccati_residual: (p - scalar_riccati_map(m, p)).abs(),
            lyapunov_residual: 0.0,
            closed_loop_radius: (a - gain).abs(),
        },
    }
}

fn vector_steady_state(m: &VectorModel) -> Result<SteadyState> {
    let dare = solve_dare(m)?;
    let p = dare.p;
    let re = m.sigma2() + m.h().dot(&(&p * m.h()));
    let gain = kalman_gain(m, &p);
    let closed_loop = m.a() - &gain * m.h().transpose();
    let lyap = solve_lyapunov(&closed_loop, &(&gain * gain.transpose()))?;
    let re_tilde = m.sigma2() * (1.0 + m.h().dot(&(&lyap.solution * m.h())));
    Ok(SteadyState {
        p,
        p_tilde: Some(lyap.solution),
        re,
        re_tilde,
        gain,
        diagnostics: SolverDiagnostics {
            dare_iterations: dare.iterations,
            riccati_residual: dare.residual,
            lyapunov_residual: lyap.residual,
            closed_loop_radius: dare.closed_loop_radius,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar(a: f64, pi0: f64, s2: f64) -> ScalarModel {
        ScalarModel::new(a, pi0, s2).unwrap()
    }

    /// Iterates the scalar Riccati map from Π0 to its fixed point.
    fn iterate_scalar(m: &ScalarModel) -> f64 {
        let mut p = m.pi0();
        for _ in 0..100_000 {
            let next = scalar_riccati_map(m, p);
            if (next - p).abs() < 1e-16 * (1.0 + p) {
                return next;
            }
            p = next;
        }
        p
    }

    #[test]
    fn scalar_prediction_variance_examples() {
        assert_eq!(scalar_prediction_variance(&scalar(0.0, 1.0, 1.0)), 1.0);
        assert_eq!(scalar_prediction_variance(&scalar(1.0, 3.0, 2.0)), 0.0);
        let m = scalar(0.5, 1.0, 1.0);
        let p = scalar_prediction_variance(&m);
        assert_relative_eq!(p, 3f64.sqrt() / 2.0, epsilon = 1e-15);
        assert_relative_eq!(p, iterate_scalar(&m), epsilon = 1e-13);
    }

    #[test]
    fn scalar_closed_form_is_riccati_fixed_point() {
        for &a in &[0.0, 0.2, 0.5, 0.9, 0.99, 0.999] {
            for &g in &[0.01, 0.5, 1.0, 10.0, 1e3] {
                let m = scalar(a, g, 1.0);
                let p = scalar_prediction_variance(&m);
                assert!(
                    (p - scalar_riccati_map(&m, p)).abs() <= 1e-12 * (1.0 + p),
                    "a={a} g={g}"
                );
            }
        }
    }

    #[test]
    fn scalar_innovation_examples() {
        let s = innovation_variances(&scalar(0.0, 1.0, 1.0).into()).unwrap();
        assert_eq!((s.re, s.re_tilde), (2.0, 1.0));
        let s = innovation_variances(&scalar(1.0, 5.0, 0.5).into()).unwrap();
        assert_eq!((s.p[(0, 0)], s.re, s.re_tilde), (0.0, 0.5, 0.5));
        let s = innovation_variances(&scalar(0.5, 1.0, 1.0).into()).unwrap();
        assert_relative_eq!(s.re, 1.0 + 3f64.sqrt() / 2.0, epsilon = 1e-15);
        assert_relative_eq!(s.re_tilde, 1.058_012_701_892_219_4, epsilon = 1e-14);
    }

    #[test]
    fn scalar_gain_examples() {
        let m = scalar(0.0, 1.0, 1.0);
        assert_eq!(scalar_kalman_gain(&m, scalar_prediction_variance(&m)), 0.0);
        let m = scalar(0.5, 1.0, 1.0);
        let k = scalar_kalman_gain(&m, scalar_prediction_variance(&m));
        assert_relative_eq!(k, 0.232_050_807_568_877_3, epsilon = 1e-14);
        assert!((0.5 - k).abs() < 1.0);
    }

    #[test]
    fn re_tilde_closed_form_matches_gain_form() {
        // R̃e = σ²(1 + K_p² / (1 − (a − K_p)²)) from the whitening filter impulse response.
        for &a in &[0.1, 0.5, 0.8, 0.95] {
            for &g in &[0.1, 1.0, 10.0] {
                let m = scalar(a, g, 1.3);
                let s = innovation_variances(&m.into()).unwrap();
                let k = s.gain[0];
                let c = a - k;
                let direct = 1.3 * (1.0 + k * k / (1.0 - c * c));
                assert_relative_eq!(s.re_tilde, direct, max_relative = 1e-12);
                assert!(s.re_tilde >= 1.3 && s.re_tilde <= s.re);
            }
        }
    }

    #[test]
    fn dare_zero_feedback() {
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]);
        let m = VectorModel::new(
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            w.clone(),
            DVector::from_vec(vec![1.0, 1.0]),
            1.0,
        )
        .unwrap();
        let sol = solve_dare(&m).unwrap();
        assert_relative_eq!(sol.p, w, epsilon = 1e-14);
    }

    #[test]
    fn dare_matches_scalar_closed_form() {
        let m = scalar(0.5, 1.0, 1.0);
        let sol = solve_dare(&m.to_vector().unwrap()).unwrap();
        assert_relative_eq!(sol.p[(0, 0)], 3f64.sqrt() / 2.0, epsilon = 1e-10);
        let k = kalman_gain(&m.to_vector().unwrap(), &sol.p)[0];
        assert_relative_eq!(
            k,
            scalar_kalman_gain(&m, scalar_prediction_variance(&m)),
            epsilon = 1e-12
        );
    }

    #[test]
    fn dare_random_stable_residual() {
        let m = crate::model::random_stable_model(7, 4, 2, 0.9).unwrap();
        let sol = solve_dare(&m).unwrap();
        assert!(sol.residual < 1e-11 * (1.0 + sol.p.norm()));
        assert!(sol.closed_loop_radius < 1.0);
        assert!(linalg::min_symmetric_eigenvalue(&sol.p) > -1e-12);
    }

    #[test]
    fn lyapunov_examples() {
        let w = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let x = solve_lyapunov(&DMatrix::zeros(2, 2), &w).unwrap();
        assert_relative_eq!(x.solution, w, epsilon = 1e-15);
        let x = solve_lyapunov(
            &DMatrix::from_element(1, 1, 0.6),
            &DMatrix::from_element(1, 1, 2.0),
        )
        .unwrap();
        assert_relative_eq!(x.solution[(0, 0)], 2.0 / (1.0 - 0.36), epsilon = 1e-14);
        assert!(solve_lyapunov(
            &DMatrix::from_element(1, 1, 1.0),
            &DMatrix::from_element(1, 1, 1.0)
        )
        .is_err());
    }

    #[test]
    fn lyapunov_route_matches_scalar_re_tilde() {
        let m = scalar(0.5, 1.0, 1.0);
        let s = innovation_variances(&m.into()).unwrap();
        let v = m.to_vector().unwrap();
        let sol = solve_dare(&v).unwrap();
        let k = kalman_gain(&v, &sol.p);
        let f = v.a() - &k * v.h().transpose();
        let x = solve_lyapunov(&f, &(&k * k.transpose())).unwrap().solution;
        let re_tilde = v.sigma2() * (1.0 + v.h().dot(&(&x * v.h())));
        assert_relative_eq!(re_tilde, s.re_tilde, epsilon = 1e-10);
    }

    #[test]
    fn doubling_agrees_with_direct() {
        let m = crate::model::random_stable_model(3, 20, 3, 0.8).unwrap();
        let w = m.state_noise();
        let big = solve_lyapunov(m.a(), w).unwrap();
        assert!(big.residual < 1e-11 * (1.0 + big.solution.norm()));
        let direct = lyapunov_direct(m.a(), w).unwrap();
        assert!((direct - &big.solution).norm() < 1e-9 * (1.0 + big.solution.norm()));
    }

    #[test]
    fn re_bounded_by_prior() {
        for i in 0..=100 {
            let a = i as f64 / 100.0;
            let m = scalar(a, 2.5, 0.7);
            let s = innovation_variances(&m.into()).unwrap();
            assert!(s.re >= 0.7 && s.re <= 0.7 + 2.5 + 1e-12, "a={a}");
        }
    }
}
