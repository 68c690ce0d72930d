//! The detector statistic two ways: innovations recursion and dense
//! covariance. Also the ergodic estimate of R̃e from one long H0 path.

use gm_exponent::model::Hypothesis;
use gm_exponent::sim::{h0_innovation_variance, llr_direct, llr_innovations, simulate_trajectory};
use gm_exponent::{innovation_variances, Model, Purpose, ScalarModel, StreamFamily};

fn main() -> gm_exponent::Result<()> {
    let model: Model = ScalarModel::from_snr(0.8, 2.0)?.into();
    let family = StreamFamily::new(7, Purpose::Trajectory, 0);
    for (i, hyp) in [
        Hypothesis::H0,
        Hypothesis::H1,
        Hypothesis::H0,
        Hypothesis::H1,
    ]
    .into_iter()
    .enumerate()
    {
        let t = simulate_trajectory(&model, hyp, 64, family.stream(i as u64))?;
        let fast = llr_innovations(&model, &t);
        let dense = llr_direct(&model, &t)?;
        println!(
            "{hyp:?}: innovations {fast:+.12}  dense {dense:+.12}  diff {:.1e}",
            (fast - dense).abs()
        );
    }

    let ss = innovation_variances(&model)?;
    let est = h0_innovation_variance(
        &model,
        1_000_000,
        StreamFamily::new(7, Purpose::Ergodic, 0).stream(0),
    )?;
    println!(
        "R̃e: closed form {:.6}, ergodic {:.6} ± {:.6}",
        ss.re_tilde, est.estimate, est.standard_error
    );
    Ok(())
}
