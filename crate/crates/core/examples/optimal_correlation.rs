//! Where correlation helps: dK/da at a few SNRs and the maximizing a.

use gm_exponent::{exponent_derivative, optimal_correlation, ScalarModel};

fn main() -> gm_exponent::Result<()> {
    for gamma in [10.0, 2.0, 1.0] {
        let slopes: Vec<f64> = [0.1, 0.5, 0.9]
            .iter()
            .map(|&a| exponent_derivative(&ScalarModel::from_snr(a, gamma).unwrap()))
            .collect::<Result<_, _>>()?;
        println!("Γ = {gamma:>5}: dK/da at a = 0.1, 0.5, 0.9 -> {slopes:+.5?}");
    }
    println!();
    println!(
        "{:>8} {:>14} {:>14} {:>14}",
        "SNR dB", "a*", "K(a*)", "K(0)"
    );
    for db in [5.0, 0.0, -1.0, -3.0, -6.0, -9.0, -12.0, -20.0, -30.0] {
        let gamma = 10f64.powf(db / 10.0);
        let opt = optimal_correlation(gamma)?;
        let iid = 0.5 * gamma.ln_1p() + 0.5 / (1.0 + gamma) - 0.5;
        println!(
            "{db:>8} {:>14.10} {:>14.8e} {iid:>14.8e}",
            opt.a_star, opt.k_at_star
        );
    }
    Ok(())
}
