//! Monte Carlo harness for the Neyman-Pearson detector.
//!
//! The detector compares the exact log-likelihood ratio
//! `log p₁(y) − log p₀(y)` with a threshold calibrated on `H0` data at level
//! `α`. The ratio is computed with the time-varying Kalman predictor of the
//! `H1` model started at the exact prior, so it is the exact finite-`n`
//! likelihood ratio; [`llr_direct`] evaluates the same quantity from dense
//! covariance matrices for cross-checking.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Hypothesis, Model, ModelSpec};
use crate::streams::{Purpose, StreamFamily, StreamId};

/// Largest `n` accepted by the dense likelihood.
pub const MAX_DIRECT_SAMPLES: usize = 512;
/// Points with fewer observed misses are left out of the slope fit.
pub const MIN_MISSES: usize = 50;
/// Smallest grid accepted by [`estimate_exponent`].
pub const MIN_GRID_POINTS: usize = 4;
/// Smallest run accepted by [`h0_innovation_variance`].
pub const MIN_ERGODIC_SAMPLES: usize = 100_000;
/// Trials handed to a worker at a time.
const CHUNK: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<f64>,
    pub hypothesis: Hypothesis,
    pub stream: StreamId,
}

/// Draws observation paths for one model. Factors of `Π0` and `Q` are
/// prepared once.
#[derive(Debug, Clone)]
pub struct TrajectorySampler {
    sigma: f64,
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Scalar {
        a: f64,
        prior_sd: f64,
        drive_sd: f64,
    },
    Vector {
        a: DMatrix<f64>,
        h: DVector<f64>,
        prior: DMatrix<f64>,
        drive: DMatrix<f64>,
    },
}

impl TrajectorySampler {
    pub fn new(model: &Model) -> Self {
        let sigma = model.sigma2().sqrt();
        let kind = match model {
            Model::Scalar(m) => SamplerKind::Scalar {
                a: m.a(),
                prior_sd: m.pi0().sqrt(),
                drive_sd: m.q().sqrt(),
            },
            Model::Vector(m) => SamplerKind::Vector {
                a: m.a().clone(),
                h: m.h().clone(),
                prior: linalg::psd_factor(m.pi0()),
                drive: m.b() * linalg::psd_factor(m.q()),
            },
        };
        Self { sigma, kind }
    }

    /// Fills `out` with one path. Per step the noise draw precedes the
    /// state-drive draw; the initial state is drawn first.
    pub fn fill<R: Rng>(&self, hypothesis: Hypothesis, rng: &mut R, out: &mut [f64]) {
        let sigma = self.sigma;
        if hypothesis == Hypothesis::H0 {
            for y in out.iter_mut() {
                *y = sigma * normal(rng);
            }
            return;
        }
        match &self.kind {
            SamplerKind::Scalar {
                a,
                prior_sd,
                drive_sd,
            } => {
                let mut s = prior_sd * normal(rng);
                for y in out.iter_mut() {
                    *y = s + sigma * normal(rng);
                    s = a * s + drive_sd * normal(rng);
                }
            }
            SamplerKind::Vector { a, h, prior, drive } => {
                let m = h.len();
                let p = drive.ncols();
                let z = DVector::from_fn(m, |_, _| normal(rng));
                let mut s = prior * z;
                let mut next = DVector::zeros(m);
                let mut u = DVector::zeros(p);
                for y in out.iter_mut() {
                    *y = h.dot(&s) + sigma * normal(rng);
                    for v in u.iter_mut() {
                        *v = normal(rng);
                    }
                    next.gemv(1.0, a, &s, 0.0);
                    next.gemv(1.0, drive, &u, 1.0);
                    std::mem::swap(&mut s, &mut next);
                }
            }
        }
    }
}

#[inline]
fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// One observation path, reproducible from `(model, hypothesis, n, stream)`.
pub fn simulate_trajectory(
    model: &Model,
    hypothesis: Hypothesis,
    n: usize,
    stream: StreamId,
) -> Result<Trajectory> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "trajectory length must be >= 1".into(),
        ));
    }
    let mut samples = vec![0.0; n];
    TrajectorySampler::new(model).fill(hypothesis, &mut stream.rng(), &mut samples);
    Ok(Trajectory {
        samples,
        hypothesis,
        stream,
    })
}

#[derive(Debug, Clone)]
enum Gains {
    Scalar {
        a: f64,
        gains: Vec<f64>,
    },
    Vector {
        a: DMatrix<f64>,
        h: DVector<f64>,
        gains: Vec<DVector<f64>>,
    },
}

/// Time-varying Kalman predictor of the `H1` model started at `P_1 = Π0`.
///
/// The innovations variances `R_{e,i}` and gains do not depend on the data,
/// so they are tabulated once; tabulation stops when the Riccati recursion
/// has settled to rounding level and later steps reuse the last entry.
#[derive(Debug, Clone)]
pub struct InnovationsFilter {
    sigma2: f64,
    re: Vec<f64>,
    /// `½ log(R_{e,i}/σ²)`.
    half_log_ratio: Vec<f64>,
    gains: Gains,
}

const SETTLE_TOL: f64 = 4.0 * f64::EPSILON;

impl InnovationsFilter {
    /// Tabulates at most `horizon` steps.
    pub fn new(model: &Model, horizon: usize) -> Self {
        let sigma2 = model.sigma2();
        let horizon = horizon.max(1);
        let mut re = Vec::new();
        let gains = match model {
            Model::Scalar(m) => {
                let (a, q) = (m.a(), m.q());
                let mut p = m.pi0();
                let mut gains = Vec::new();
                for _ in 0..horizon {
                    let r = p + sigma2;
                    let k = a * p / r;
                    let next = a * a * p + q - k * k * r;
                    debug_assert!(
                        next <= p * (1.0 + 1e-12) + 1e-300,
                        "R_e,i must not increase"
                    );
                    re.push(r);
                    gains.push(k);
                    if (next - p).abs() <= SETTLE_TOL * p.abs() {
                        break;
                    }
                    p = next;
                }
                Gains::Scalar { a, gains }
            }
            Model::Vector(m) => {
                let a = m.a().clone();
                let h = m.h().clone();
                let mut p = m.pi0().clone();
                let mut gains = Vec::new();
                for _ in 0..horizon {
                    let ph = &p * &h;
                    let r = h.dot(&ph) + sigma2;
                    let k = &a * ph / r;
                    let mut next =
                        &a * &p * a.transpose() + m.state_noise() - &k * k.transpose() * r;
                    linalg::symmetrize(&mut next);
                    debug_assert!(re.last().is_none_or(|&prev| r <= prev * (1.0 + 1e-10)));
                    re.push(r);
                    gains.push(k);
                    let settled = (&next - &p).norm() <= SETTLE_TOL * p.norm();
                    p = next;
                    if settled {
                        break;
                    }
                }
                Gains::Vector { a, h, gains }
            }
        };
        let half_log_ratio = re.iter().map(|r| 0.5 * (r / sigma2).ln()).collect();
        Self {
            sigma2,
            re,
            half_log_ratio,
            gains,
        }
    }

    /// `R_{e,i}` for 1-based step `i`.
    pub fn innovation_variance(&self, i: usize) -> f64 {
        self.re[(i.max(1) - 1).min(self.re.len() - 1)]
    }

    /// Number of tabulated steps before the recursion settled.
    pub fn settled_after(&self) -> usize {
        self.re.len()
    }

    /// Runs the predictor over `y`, handing `(i, e_i, R_{e,i})` (0-based `i`)
    /// to `visit`.
    pub fn for_each_innovation<F: FnMut(usize, f64, f64)>(&self, y: &[f64], mut visit: F) {
        let last = self.re.len() - 1;
        match &self.gains {
            Gains::Scalar { a, gains } => {
                let mut pred = 0.0;
                for (i, &yi) in y.iter().enumerate() {
                    let j = i.min(last);
                    let e = yi - pred;
                    visit(i, e, self.re[j]);
                    pred = a * pred + gains[j] * e;
                }
            }
            Gains::Vector { a, h, gains } => {
                let mut x = DVector::zeros(h.len());
                let mut next = DVector::zeros(h.len());
                for (i, &yi) in y.iter().enumerate() {
                    let j = i.min(last);
                    let e = yi - h.dot(&x);
                    visit(i, e, self.re[j]);
                    next.gemv(1.0, a, &x, 0.0);
                    next.axpy(e, &gains[j], 1.0);
                    std::mem::swap(&mut x, &mut next);
                }
            }
        }
    }

    /// `log p₁(y) − log p₀(y)`.
    pub fn llr(&self, y: &[f64]) -> f64 {
        let last = self.re.len() - 1;
        let inv_s2 = 0.5 / self.sigma2;
        let mut total = 0.0;
        self.for_each_innovation(y, |i, e, re| {
            let j = i.min(last);
            total += y[i] * y[i] * inv_s2 - 0.5 * e * e / re - self.half_log_ratio[j];
        });
        total
    }

    pub fn innovations(&self, y: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(y.len());
        self.for_each_innovation(y, |_, e, _| out.push(e));
        out
    }
}

/// Exact log-likelihood ratio by the innovations recursion.
pub fn llr_innovations(model: &Model, trajectory: &Trajectory) -> f64 {
    InnovationsFilter::new(model, trajectory.samples.len()).llr(&trajectory.samples)
}

/// Exact log-likelihood ratio from the dense `H1` covariance
/// `Σ₁ = [r_s(l − m)] + σ² I`:
/// `−½ log det(Σ₁/σ²) − ½ yᵀΣ₁⁻¹y + ½ yᵀy/σ²`.
pub fn llr_direct(model: &Model, trajectory: &Trajectory) -> Result<f64> {
    let y = &trajectory.samples;
    let n = y.len();
    if n > MAX_DIRECT_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "dense likelihood is limited to n <= {MAX_DIRECT_SAMPLES} (got {n}); use llr_innovations"
        )));
    }
    let sigma2 = model.sigma2();
    let acov: Vec<f64> = (0..n as i64)
        .map(|k| model.observation_autocovariance(Hypothesis::H1, k))
        .collect();
    let cov = DMatrix::from_fn(n, n, |l, m| acov[l.abs_diff(m)] / sigma2);
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::NumericalDefect("H1 covariance is not positive definite".into()))?;
    let log_det: f64 = chol
        .l_dirty()
        .diagonal()
        .iter()
        .take(n)
        .map(|d| 2.0 * d.ln())
        .sum();
    let yv = DVector::from_column_slice(y);
    let quad = yv.dot(&chol.solve(&yv)) / sigma2;
    let energy = yv.norm_squared() / sigma2;
    Ok(-0.5 * log_det - 0.5 * quad + 0.5 * energy)
}

/// Smallest calibration run accepted at level `alpha`:
/// `max(10⁴, ⌈100/α⌉)`.
pub fn calibration_floor(alpha: f64) -> usize {
    10_000usize.max((100.0 / alpha).ceil() as usize)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "level alpha must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// LLRs of `trials` paths drawn from `family`, in trial order.
pub fn simulate_llrs(
    model: &Model,
    hypothesis: Hypothesis,
    n: usize,
    trials: usize,
    family: StreamFamily,
) -> Vec<f64> {
    let sampler = TrajectorySampler::new(model);
    let filter = InnovationsFilter::new(model, n);
    let chunks: Vec<usize> = (0..trials).step_by(CHUNK).collect();
    chunks
        .into_par_iter()
        .flat_map_iter(|start| {
            let end = (start + CHUNK).min(trials);
            let mut buf = vec![0.0; n];
            (start..end)
                .map(|t| {
                    let mut rng = family.stream(t as u64).rng();
                    sampler.fill(hypothesis, &mut rng, &mut buf);
                    filter.llr(&buf)
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Threshold `τ` from the empirical `(1 − α)`-quantile of `H0` LLRs, taken
/// as the upper order statistic so that at most `⌊αN⌋` calibration values
/// exceed it.
pub fn calibrate_threshold(
    model: &Model,
    n: usize,
    alpha: f64,
    trials: usize,
    family: StreamFamily,
) -> Result<f64> {
    check_alpha(alpha)?;
    let floor = calibration_floor(alpha);
    if trials < floor {
        return Err(Error::InvalidArgument(format!(
            "calibration needs at least {floor} trials at alpha = {alpha}, got {trials}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be >= 1".into()));
    }
    let mut llrs = simulate_llrs(model, Hypothesis::H0, n, trials, family);
    Ok(upper_quantile(&mut llrs, alpha))
}

/// Order statistic with at most `⌊αN⌋` values strictly above it.
pub(crate) fn upper_quantile(values: &mut [f64], alpha: f64) -> f64 {
    let n = values.len();
    let allowed = ((alpha * n as f64) * (1.0 + 1e-12)).floor() as usize;
    let k = n - 1 - allowed.min(n - 1);
    let (_, kth, _) = values.select_nth_unstable_by(k, f64::total_cmp);
    *kth
}

/// Trials per grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub calibration: usize,
    pub evaluation: usize,
}

impl TrialPlan {
    pub fn uniform(trials: usize) -> Self {
        Self {
            calibration: trials,
            evaluation: trials,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MissEstimate {
    pub n: usize,
    pub tau: f64,
    pub pm: f64,
    /// Binomial standard error `√(P̂(1 − P̂)/trials)`.
    pub pm_se: f64,
    pub trials: usize,
    pub misses: usize,
}

/// Fraction of `H1` paths whose LLR does not exceed `tau`.
pub fn count_misses(
    model: &Model,
    n: usize,
    tau: f64,
    trials: usize,
    family: StreamFamily,
) -> usize {
    let sampler = TrajectorySampler::new(model);
    let filter = InnovationsFilter::new(model, n);
    let chunks: Vec<usize> = (0..trials).step_by(CHUNK).collect();
    chunks
        .into_par_iter()
        .map(|start| {
            let end = (start + CHUNK).min(trials);
            let mut buf = vec![0.0; n];
            (start..end)
                .filter(|&t| {
                    let mut rng = family.stream(t as u64).rng();
                    sampler.fill(Hypothesis::H1, &mut rng, &mut buf);
                    filter.llr(&buf) <= tau
                })
                .count()
        })
        .sum()
}

/// Calibrates `τ` on one stream family, then estimates `P_M` on a disjoint
/// one. Streams are labelled by `n`.
pub fn estimate_miss_probability(
    model: &Model,
    n: usize,
    alpha: f64,
    plan: TrialPlan,
    seed: u64,
) -> Result<MissEstimate> {
    if plan.evaluation == 0 {
        return Err(Error::InvalidArgument(
            "evaluation trials must be >= 1".into(),
        ));
    }
    let label = n as u64;
    let tau = calibrate_threshold(
        model,
        n,
        alpha,
        plan.calibration,
        StreamFamily::new(seed, Purpose::Calibration, label),
    )?;
    let misses = count_misses(
        model,
        n,
        tau,
        plan.evaluation,
        StreamFamily::new(seed, Purpose::Evaluation, label),
    );
    let pm = misses as f64 / plan.evaluation as f64;
    Ok(MissEstimate {
        n,
        tau,
        pm,
        pm_se: (pm * (1.0 - pm) / plan.evaluation as f64).sqrt(),
        trials: plan.evaluation,
        misses,
    })
}

/// Least-squares line through `(x, y)` with its slope standard error
/// `√(s²/Sxx)`, `s² = RSS/(k − 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let slope_se = if x.len() > 2 {
        (rss / (k - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    LineFit {
        slope,
        intercept,
        slope_se,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub alpha: f64,
    pub points: Vec<MissEstimate>,
    /// Grid sizes that entered the fit.
    pub fitted_n: Vec<usize>,
    /// Slope of `−log P̂_M` against `n` (nats per sample).
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
}

/// Miss probabilities over `n_grid` and the fitted decay rate of
/// `−log P̂_M`; points with fewer than [`MIN_MISSES`] misses are not fitted.
pub fn estimate_exponent(
    model: &Model,
    alpha: f64,
    n_grid: &[usize],
    plan: TrialPlan,
    seed: u64,
) -> Result<SimResult> {
    check_alpha(alpha)?;
    if n_grid.len() < MIN_GRID_POINTS {
        return Err(Error::InvalidArgument(format!(
            "n_grid needs at least {MIN_GRID_POINTS} points, got {}",
            n_grid.len()
        )));
    }
    if n_grid[0] == 0 || n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "n_grid must be strictly increasing and positive".into(),
        ));
    }
    let points = n_grid
        .iter()
        .map(|&n| estimate_miss_probability(model, n, alpha, plan, seed))
        .collect::<Result<Vec<_>>>()?;
    let usable: Vec<&MissEstimate> = points.iter().filter(|p| p.misses >= MIN_MISSES).collect();
    if usable.len() < MIN_GRID_POINTS {
        return Err(Error::SimulationInfeasible(format!(
            "only {} grid points reached {MIN_MISSES} misses; raise trials or lower n",
            usable.len()
        )));
    }
    let x: Vec<f64> = usable.iter().map(|p| p.n as f64).collect();
    let y: Vec<f64> = usable.iter().map(|p| -p.pm.ln()).collect();
    let fit = fit_line(&x, &y);
    Ok(SimResult {
        alpha,
        fitted_n: usable.iter().map(|p| p.n).collect(),
        points,
        slope: fit.slope,
        slope_se: fit.slope_se,
        intercept: fit.intercept,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WhitenedVariance {
    pub estimate: f64,
    /// Batch-means standard error.
    pub standard_error: f64,
    pub samples: usize,
}

const VARIANCE_BATCHES: usize = 100;

/// Mean square of the `H1` whitening filter output over the second half of
/// one length-`n` path drawn under `source`.
pub fn whitened_output_variance(
    model: &Model,
    source: Hypothesis,
    n: usize,
    stream: StreamId,
) -> Result<WhitenedVariance> {
    if n < 2 * VARIANCE_BATCHES {
        return Err(Error::InvalidArgument(format!(
            "need at least {} samples",
            2 * VARIANCE_BATCHES
        )));
    }
    let traj = simulate_trajectory(model, source, n, stream)?;
    let filter = InnovationsFilter::new(model, n);
    let start = n / 2;
    let kept = n - start;
    let batch_len = kept / VARIANCE_BATCHES;
    let mut batch_sums = vec![0.0; VARIANCE_BATCHES];
    filter.for_each_innovation(&traj.samples, |i, e, _| {
        if i >= start {
            let b = ((i - start) / batch_len).min(VARIANCE_BATCHES - 1);
            batch_sums[b] += e * e;
        }
    });
    let counts: Vec<usize> = (0..VARIANCE_BATCHES)
        .map(|b| {
            if b + 1 == VARIANCE_BATCHES {
                kept - b * batch_len
            } else {
                batch_len
            }
        })
        .collect();
    let estimate = batch_sums.iter().sum::<f64>() / kept as f64;
    let means: Vec<f64> = batch_sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / VARIANCE_BATCHES as f64;
    let var =
        means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (VARIANCE_BATCHES - 1) as f64;
    Ok(WhitenedVariance {
        estimate,
        standard_error: (var / VARIANCE_BATCHES as f64).sqrt(),
        samples: kept,
    })
}

/// Ergodic estimate of `R̃e`: the `H1` whitening filter run on `H0` data.
pub fn h0_innovation_variance(
    model: &Model,
    n: usize,
    stream: StreamId,
) -> Result<WhitenedVariance> {
    if n < MIN_ERGODIC_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "ergodic estimate needs n >= {MIN_ERGODIC_SAMPLES}, got {n}"
        )));
    }
    whitened_output_variance(model, Hypothesis::H0, n, stream)
}

/// Monte Carlo run description, shared by the CLI's `simulate` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub model: ModelSpec,
    pub alpha: f64,
    pub n_grid: Vec<usize>,
    /// Evaluation trials per grid point.
    pub trials: usize,
    /// Calibration trials per grid point; defaults to `trials`.
    #[serde(default)]
    pub calibration_trials: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl SimConfig {
    pub fn plan(&self) -> TrialPlan {
        TrialPlan {
            calibration: self.calibration_trials.unwrap_or(self.trials),
            evaluation: self.trials,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScalarModel;
    use crate::streams::Purpose;
    use approx::assert_relative_eq;

    fn scalar(a: f64, gamma: f64) -> Model {
        ScalarModel::from_snr(a, gamma).unwrap().into()
    }

    fn traj(model: &Model, h: Hypothesis, n: usize, idx: u64) -> Trajectory {
        simulate_trajectory(
            model,
            h,
            n,
            StreamFamily::new(9, Purpose::Trajectory, 0).stream(idx),
        )
        .unwrap()
    }

    #[test]
    fn trajectories_are_deterministic() {
        let m = scalar(0.5, 2.0);
        assert_eq!(
            traj(&m, Hypothesis::H1, 50, 3),
            traj(&m, Hypothesis::H1, 50, 3)
        );
        assert_ne!(
            traj(&m, Hypothesis::H1, 50, 3).samples,
            traj(&m, Hypothesis::H1, 50, 4).samples
        );
        assert!(simulate_trajectory(
            &m,
            Hypothesis::H0,
            0,
            StreamFamily::new(1, Purpose::Trajectory, 0).stream(0)
        )
        .is_err());
    }

    #[test]
    fn single_sample_llr() {
        let m = scalar(0.6, 3.0);
        let t = traj(&m, Hypothesis::H1, 1, 0);
        let y = t.samples[0];
        let re1: f64 = 3.0 + 1.0;
        let expected = -0.5 * re1.ln() + y * y * (0.5 - 0.5 / re1);
        assert_relative_eq!(llr_innovations(&m, &t), expected, epsilon = 1e-14);
        assert_relative_eq!(llr_direct(&m, &t).unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn iid_llr_factorizes() {
        let m: Model = ScalarModel::new(0.0, 2.0, 0.5).unwrap().into();
        let t = traj(&m, Hypothesis::H0, 5, 1);
        let g: f64 = 4.0;
        let expected: f64 = t
            .samples
            .iter()
            .map(|y| -0.5 * (1.0 + g).ln() + y * y * (1.0 / (2.0 * 0.5) - 1.0 / (2.0 * 2.5)))
            .sum();
        assert_relative_eq!(llr_innovations(&m, &t), expected, epsilon = 1e-13);
        assert_relative_eq!(llr_direct(&m, &t).unwrap(), expected, epsilon = 1e-13);
    }

    #[test]
    fn dense_oracle_agrees() {
        let m = scalar(0.8, 0.5);
        for h in [Hypothesis::H0, Hypothesis::H1] {
            for i in 0..100 {
                let t = traj(&m, h, 64, i);
                let a = llr_innovations(&m, &t);
                let b = llr_direct(&m, &t).unwrap();
                assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn dense_oracle_rejects_long_paths() {
        let m = scalar(0.5, 1.0);
        let t = traj(&m, Hypothesis::H0, 513, 0);
        assert!(matches!(llr_direct(&m, &t), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn innovations_variance_schedule_converges() {
        for &a in &[0.0, 0.3, 0.6, 0.9] {
            let m = scalar(a, 2.0);
            let f = InnovationsFilter::new(&m, 1000);
            let re = crate::steady_state::innovation_variances(&m).unwrap().re;
            assert!((f.innovation_variance(1000) - re).abs() < 1e-9);
            for i in 2..=100 {
                assert!(f.innovation_variance(i) <= f.innovation_variance(i - 1) * (1.0 + 1e-14));
            }
        }
    }

    #[test]
    fn upper_quantile_is_conservative() {
        let mut v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let tau = upper_quantile(&mut v, 0.01);
        assert_eq!(tau, 989.0);
        assert_eq!(v.iter().filter(|&&x| x > tau).count(), 10);
        let mut v: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(upper_quantile(&mut v, 0.5), 4.0);
        let mut ties = vec![1.0; 100];
        assert_eq!(upper_quantile(&mut ties, 0.1), 1.0);
    }

    #[test]
    fn calibration_enforces_floor() {
        let m = scalar(0.5, 1.0);
        let fam = StreamFamily::new(1, Purpose::Calibration, 0);
        assert_eq!(calibration_floor(0.001), 100_000);
        assert_eq!(calibration_floor(0.5), 10_000);
        assert!(calibrate_threshold(&m, 5, 0.001, 99_999, fam).is_err());
        assert!(calibrate_threshold(&m, 5, 1.0, 10_000, fam).is_err());
    }

    #[test]
    fn median_threshold() {
        let m = scalar(0.5, 1.0);
        let fam = StreamFamily::new(5, Purpose::Calibration, 0);
        let tau = calibrate_threshold(&m, 8, 0.5, 10_000, fam).unwrap();
        let mut llrs = simulate_llrs(&m, Hypothesis::H0, 8, 10_000, fam);
        llrs.sort_by(f64::total_cmp);
        assert_eq!(tau, llrs[4999]);
    }

    #[test]
    fn no_signal_always_misses() {
        let m = scalar(0.5, 0.0);
        let est = estimate_miss_probability(&m, 6, 0.1, TrialPlan::uniform(20_000), 3).unwrap();
        assert_eq!(est.tau, 0.0);
        assert_eq!(est.pm, 1.0);
    }

    #[test]
    fn miss_probability_decreases_with_n() {
        let m = scalar(0.5, 1.0);
        let plan = TrialPlan::uniform(20_000);
        let a = estimate_miss_probability(&m, 5, 0.05, plan, 3).unwrap();
        let b = estimate_miss_probability(&m, 40, 0.05, plan, 3).unwrap();
        assert!(a.pm > b.pm + 5.0 * (a.pm_se + b.pm_se), "{a:?} {b:?}");
        assert_eq!(a, estimate_miss_probability(&m, 5, 0.05, plan, 3).unwrap());
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        let f = fit_line(&x, &y);
        assert_relative_eq!(f.slope, 2.0, epsilon = 1e-12);
        assert_relative_eq!(f.intercept, 1.0, epsilon = 1e-12);
        assert!(f.slope_se < 1e-7);
    }

    #[test]
    fn exponent_grid_validation() {
        let m = scalar(0.0, 10.0);
        let plan = TrialPlan::uniform(10_000);
        assert!(estimate_exponent(&m, 0.01, &[1, 2, 3], plan, 0).is_err());
        assert!(estimate_exponent(&m, 0.01, &[1, 3, 2, 4], plan, 0).is_err());
        // Rare misses at large n cannot supply four fitted points.
        assert!(matches!(
            estimate_exponent(&m, 0.01, &[30, 40, 50, 60], plan, 0),
            Err(Error::SimulationInfeasible(_))
        ));
    }

    #[test]
    fn ergodic_variance_requires_long_run() {
        let m = scalar(0.5, 1.0);
        assert!(h0_innovation_variance(
            &m,
            1000,
            StreamFamily::new(0, Purpose::Ergodic, 0).stream(0)
        )
        .is_err());
    }

    #[test]
    fn white_signal_gives_noise_variance() {
        let m = scalar(0.0, 4.0);
        let v = h0_innovation_variance(
            &m,
            200_000,
            StreamFamily::new(2, Purpose::Ergodic, 0).stream(0),
        )
        .unwrap();
        assert!((v.estimate - 1.0).abs() < 3.0 * v.standard_error, "{v:?}");
    }
}
