//! K against SNR at fixed correlation, with the high-SNR form
//! ½ log(1 + Γ(1 − a²)) + ½ (1 + a²)/(1 + Γ(1 − a²)) − ½.

use gm_exponent::{error_exponent_closed, high_snr_asymptote, ScalarModel};

fn main() -> gm_exponent::Result<()> {
    let a = (-1f64).exp();
    println!("a = {a:.6}");
    println!(
        "{:>7} {:>14} {:>14} {:>10}",
        "SNR dB", "K", "asymptote", "rel gap"
    );
    for db in (-10..=40).step_by(5) {
        let m = ScalarModel::from_snr(a, 10f64.powf(db as f64 / 10.0))?;
        let k = error_exponent_closed(&m.into())?;
        let asym = high_snr_asymptote(&m)?;
        println!(
            "{db:>7} {k:>14.8} {asym:>14.8} {:>10.2e}",
            (asym - k).abs() / k
        );
    }
    Ok(())
}
