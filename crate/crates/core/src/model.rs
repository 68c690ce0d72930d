//! Scalar and vector Gauss-Markov observation models.
//!
//! Under `H0` the observations are white noise `y_i = w_i`, under `H1` they
//! carry a stationary state-space signal `y_i = hᵀ s_i + w_i` with
//! `s_{i+1} = A s_i + B u_i`. The scalar model is the `m = 1` case with the
//! process noise variance tied to the stationary variance,
//! `Q = Π0 (1 − a²)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::steady_state;

/// Largest admitted state or input dimension.
pub const MAX_DIM: usize = 64;

/// Stability margin: spectral radii in `[1 − STABILITY_MARGIN, ∞)` are
/// rejected.
pub const STABILITY_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    /// Noise only.
    H0,
    /// Signal plus noise.
    H1,
}

/// First-order model `s_{i+1} = a s_i + u_i`, `s_1 ~ N(0, Π0)`,
/// `u_i ~ N(0, Π0(1 − a²))`, observed in `N(0, σ²)` noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarModel {
    a: f64,
    pi0: f64,
    sigma2: f64,
    q: f64,
}

impl ScalarModel {
    pub fn new(a: f64, pi0: f64, sigma2: f64) -> Result<Self> {
        if !a.is_finite() || !(0.0..=1.0).contains(&a) {
            return Err(Error::invalid(format!(
                "correlation a must lie in [0, 1], got {a}"
            )));
        }
        if !pi0.is_finite() || pi0 < 0.0 {
            return Err(Error::invalid(format!(
                "signal variance pi0 must be >= 0, got {pi0}"
            )));
        }
        if !sigma2.is_finite() || sigma2 <= 0.0 {
            return Err(Error::invalid(format!(
                "noise variance sigma2 must be > 0, got {sigma2}"
            )));
        }
        Ok(Self {
            a,
            pi0,
            sigma2,
            q: pi0 * (1.0 - a * a),
        })
    }

    /// Model with unit noise and `Π0 = Γ`.
    pub fn from_snr(a: f64, gamma: f64) -> Result<Self> {
        Self::new(a, gamma, 1.0)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn pi0(&self) -> f64 {
        self.pi0
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Process-noise variance `Π0 (1 − a²)`.
    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn snr(&self) -> f64 {
        self.pi0 / self.sigma2
    }

    /// `a = 1`: the signal is frozen at its initial value and the `H1`
    /// spectrum has a point mass at ω = 0.
    pub fn is_degenerate(&self) -> bool {
        self.a == 1.0
    }

    /// The `m = p = 1` embedding `A = [a]`, `B = [1]`, `Q = [Π0(1 − a²)]`,
    /// `h = [1]`. Fails for `a = 1`, which is not strictly stable.
    pub fn to_vector(&self) -> Result<VectorModel> {
        VectorModel::new(
            DMatrix::from_element(1, 1, self.a),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, self.q),
            DVector::from_element(1, 1.0),
            self.sigma2,
        )
    }
}

/// Vector model with scalar observations `y_i = hᵀ s_i + w_i`. The
/// stationary covariance `Π0` is solved from `Π0 = A Π0 Aᵀ + B Q Bᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    q: DMatrix<f64>,
    h: DVector<f64>,
    sigma2: f64,
    pi0: DMatrix<f64>,
    bqbt: DMatrix<f64>,
    radius: f64,
}

impl VectorModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        q: DMatrix<f64>,
        h: DVector<f64>,
        sigma2: f64,
    ) -> Result<Self> {
        let m = a.nrows();
        if m == 0 || a.ncols() != m {
            return Err(Error::invalid(format!(
                "A must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let p = b.ncols();
        if m > MAX_DIM || p > MAX_DIM {
            return Err(Error::invalid(format!(
                "dimensions capped at m, p <= {MAX_DIM}, got m={m}, p={p}"
            )));
        }
        if b.nrows() != m || p == 0 {
            return Err(Error::invalid(format!(
                "B must be {m}xp with p >= 1, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        if q.nrows() != p || q.ncols() != p {
            return Err(Error::invalid(format!(
                "Q must be {p}x{p}, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        if h.len() != m {
            return Err(Error::invalid(format!(
                "h must have length {m}, got {}",
                h.len()
            )));
        }
        let all_finite = a
            .iter()
            .chain(b.iter())
            .chain(q.iter())
            .chain(h.iter())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        if !sigma2.is_finite() || sigma2 <= 0.0 {
            return Err(Error::invalid(format!(
                "noise variance sigma2 must be > 0, got {sigma2}"
            )));
        }
        let q_tol = linalg::scaled_tol(1e-12, q.norm());
        if linalg::asymmetry(&q) > q_tol {
            return Err(Error::invalid("Q must be symmetric"));
        }
        if linalg::min_symmetric_eigenvalue(&q) < -q_tol {
            return Err(Error::invalid("Q must be positive semidefinite"));
        }
        let radius = linalg::spectral_radius(&a);
        if radius >= 1.0 - STABILITY_MARGIN {
            return Err(Error::NonStationary { radius });
        }

        let mut bqbt = &b * &q * b.transpose();
        linalg::symmetrize(&mut bqbt);
        let pi0 = steady_state::solve_lyapunov(&a, &bqbt)?.solution;
        let residual = (&pi0 - (&a * &pi0 * a.transpose() + &bqbt)).norm();
        if residual > 1e-10 * (1.0 + pi0.norm()) {
            return Err(Error::NumericalDefect(format!(
                "stationary covariance residual {residual:e} exceeds 1e-10"
            )));
        }
        Ok(Self {
            a,
            b,
            q,
            h,
            sigma2,
            pi0,
            bqbt,
            radius,
        })
    }

    /// Parse the JSON document `{"A": [[..]], "B": [[..]], "Q": [[..]],
    /// "h": [..], "sigma2": x}` with row-major nested arrays.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: VectorModelDocument = serde_json::from_str(text)?;
        doc.build()
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn h(&self) -> &DVector<f64> {
        &self.h
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Stationary state covariance.
    pub fn pi0(&self) -> &DMatrix<f64> {
        &self.pi0
    }

    /// `B Q Bᵀ`, the state-noise covariance.
    pub fn state_noise(&self) -> &DMatrix<f64> {
        &self.bqbt
    }

    pub fn spectral_radius(&self) -> f64 {
        self.radius
    }

    pub fn snr(&self) -> f64 {
        self.h.dot(&(&self.pi0 * &self.h)) / self.sigma2
    }

    pub fn to_document(&self) -> VectorModelDocument {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            m.row_iter().map(|r| r.iter().copied().collect()).collect()
        };
        VectorModelDocument {
            a: rows(&self.a),
            b: rows(&self.b),
            q: rows(&self.q),
            h: self.h.iter().copied().collect(),
            sigma2: self.sigma2,
        }
    }
}

/// Serialized form of a [`VectorModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorModelDocument {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    pub sigma2: f64,
}

impl VectorModelDocument {
    pub fn build(&self) -> Result<VectorModel> {
        VectorModel::new(
            matrix_from_rows("A", &self.a)?,
            matrix_from_rows("B", &self.b)?,
            matrix_from_rows("Q", &self.q)?,
            DVector::from_column_slice(&self.h),
            self.sigma2,
        )
    }
}

fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::invalid(format!("{name} has ragged rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Random strictly stable model: Gaussian `A` rescaled to the requested
/// spectral radius, `Q = G Gᵀ`, Gaussian `B` and `h`, unit noise.
pub fn random_stable_model(seed: u64, m: usize, p: usize, radius: f64) -> Result<VectorModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw =
        |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
    let mut a = draw(m, m);
    let rho = linalg::spectral_radius(&a);
    if rho > 0.0 {
        a *= radius / rho;
    }
    let b = draw(m, p);
    let g = draw(p, p);
    let mut q = &g * g.transpose();
    linalg::symmetrize(&mut q);
    let h = draw(m, 1).column(0).into_owned();
    VectorModel::new(a, b, q, h, 1.0)
}

/// JSON model block shared by the simulation config and the CLI: either
/// `{"a", "pi0", "sigma2"}` or a [`VectorModelDocument`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Scalar(ScalarModelDocument),
    Vector(VectorModelDocument),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarModelDocument {
    pub a: f64,
    pub pi0: f64,
    pub sigma2: f64,
}

impl ModelSpec {
    pub fn build(&self) -> Result<Model> {
        Ok(match self {
            ModelSpec::Scalar(d) => ScalarModel::new(d.a, d.pi0, d.sigma2)?.into(),
            ModelSpec::Vector(d) => d.build()?.into(),
        })
    }
}

impl From<&Model> for ModelSpec {
    fn from(m: &Model) -> Self {
        match m {
            Model::Scalar(s) => ModelSpec::Scalar(ScalarModelDocument {
                a: s.a(),
                pi0: s.pi0(),
                sigma2: s.sigma2(),
            }),
            Model::Vector(v) => ModelSpec::Vector(v.to_document()),
        }
    }
}

/// Either model family; every downstream routine accepts this.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Scalar(ScalarModel),
    Vector(VectorModel),
}

impl From<ScalarModel> for Model {
    fn from(m: ScalarModel) -> Self {
        Model::Scalar(m)
    }
}

impl From<VectorModel> for Model {
    fn from(m: VectorModel) -> Self {
        Model::Vector(m)
    }
}

impl Model {
    pub fn sigma2(&self) -> f64 {
        match self {
            Model::Scalar(m) => m.sigma2(),
            Model::Vector(m) => m.sigma2(),
        }
    }

    pub fn snr(&self) -> f64 {
        match self {
            Model::Scalar(m) => m.snr(),
            Model::Vector(m) => m.snr(),
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, Model::Scalar(m) if m.is_degenerate())
    }

    /// Zero signal power: both hypotheses coincide.
    pub fn is_signal_free(&self) -> bool {
        match self {
            Model::Scalar(m) => m.pi0() == 0.0,
            Model::Vector(m) => m.snr() == 0.0,
        }
    }

    /// Signal autocovariance `E{s_i s_j}` at `lag = i − j` (for the vector
    /// model, of the observed component `hᵀ s_i`).
    pub fn signal_autocovariance(&self, lag: i64) -> f64 {
        let k = lag.unsigned_abs();
        match self {
            Model::Scalar(m) => {
                let decay = match i32::try_from(k) {
                    Ok(k) => m.a().powi(k),
                    Err(_) => m.a().powf(k as f64),
                };
                m.pi0() * decay
            }
            Model::Vector(m) => {
                let ak = matrix_power(m.a(), k);
                m.h().dot(&(ak * m.pi0() * m.h()))
            }
        }
    }

    /// Observation autocovariance under the given hypothesis.
    pub fn observation_autocovariance(&self, hypothesis: Hypothesis, lag: i64) -> f64 {
        let noise = if lag == 0 { self.sigma2() } else { 0.0 };
        match hypothesis {
            Hypothesis::H0 => noise,
            Hypothesis::H1 => noise + self.signal_autocovariance(lag),
        }
    }

    /// Power spectral density of the observations at angular frequency
    /// `omega` (2π-periodic).
    pub fn observation_spectrum(&self, hypothesis: Hypothesis, omega: f64) -> Result<f64> {
        if !omega.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "frequency must be finite, got {omega}"
            )));
        }
        let sigma2 = self.sigma2();
        if hypothesis == Hypothesis::H0 {
            return Ok(sigma2);
        }
        Ok(sigma2 + self.signal_spectrum(omega)?)
    }

    /// Signal part of the `H1` spectrum.
    pub fn signal_spectrum(&self, omega: f64) -> Result<f64> {
        match self {
            Model::Scalar(m) => {
                if m.is_degenerate() {
                    if omega.rem_euclid(2.0 * PI) == 0.0 {
                        return Err(Error::DegenerateSpectrum(
                            "a = 1 spectrum is singular at omega = 0".into(),
                        ));
                    }
                    return Ok(0.0);
                }
                Ok(m.q() / poisson_denominator(m.a(), omega))
            }
            Model::Vector(m) => Ok(vector_signal_spectrum(m, omega)),
        }
    }
}

/// `1 − 2a cos ω + a²`, written as `(1 − a)² + 4a sin²(ω/2)` to avoid
/// cancellation near `a = 1, ω = 0`.
pub(crate) fn poisson_denominator(a: f64, omega: f64) -> f64 {
    let s = (0.5 * omega).sin();
    (1.0 - a) * (1.0 - a) + 4.0 * a * s * s
}

/// `g Q gᴴ` with `g = hᵀ (e^{jω} I − A)⁻¹ B`, evaluated through the
/// transposed resolvent solve `(e^{jω} I − Aᵀ) x = h`.
fn vector_signal_spectrum(m: &VectorModel, omega: f64) -> f64 {
    let n = m.state_dim();
    let z = Complex64::from_polar(1.0, omega);
    let resolvent = DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { z } else { Complex64::new(0.0, 0.0) };
        diag - Complex64::new(m.a()[(j, i)], 0.0)
    });
    let rhs = m.h().map(|v| Complex64::new(v, 0.0));
    let x = resolvent
        .lu()
        .solve(&rhs)
        .expect("resolvent is invertible on the unit circle for stable A");
    let b = m.b().map(|v| Complex64::new(v, 0.0));
    let g = b.transpose() * x;
    let q = m.q().map(|v| Complex64::new(v, 0.0));
    let value = g.adjoint() * q * &g;
    value[(0, 0)].re
}

pub(crate) fn matrix_power(a: &DMatrix<f64>, mut k: u64) -> DMatrix<f64> {
    let n = a.nrows();
    let mut result = DMatrix::identity(n, n);
    let mut base = a.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = &result * &base;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    result
}
