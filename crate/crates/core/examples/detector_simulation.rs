//! Monte Carlo miss probabilities of the level-α detector and the fitted
//! decay rate, next to the theoretical exponent.
//!
//!     cargo run --release --example detector_simulation -- 200000

use gm_exponent::{error_exponent_closed, estimate_exponent, Model, ScalarModel, TrialPlan};

fn main() -> gm_exponent::Result<()> {
    let trials: usize = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("trial count"))
        .unwrap_or(200_000);
    let alpha = 1e-2;
    let plan = TrialPlan::uniform(trials);
    let grid: Vec<usize> = (1..=10).map(|i| 2 * i).collect();
    for a in [0.0, 0.5, 0.9] {
        let model: Model = ScalarModel::from_snr(a, 10.0)?.into();
        let k = error_exponent_closed(&model)?;
        let res = estimate_exponent(&model, alpha, &grid, plan, 2024)?;
        println!(
            "a = {a}: K = {k:.4}, fitted slope {:.4} ± {:.4} over n = {:?}",
            res.slope, res.slope_se, res.fitted_n
        );
        for p in &res.points {
            println!(
                "    n = {:>3}  P_M = {:.3e} ± {:.1e}  tau = {:+.4}",
                p.n, p.pm, p.pm_se, p.tau
            );
        }
    }
    Ok(())
}
