//! Steady-state innovations variances and the closed-form exponent for a
//! few scalar models.
//!
//!     cargo run --example closed_form -- 10

use gm_exponent::{error_exponent_closed, innovation_variances, Model, ScalarModel};

fn main() -> gm_exponent::Result<()> {
    let snr_db: f64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("SNR in dB"))
        .unwrap_or(10.0);
    let gamma = 10f64.powf(snr_db / 10.0);
    println!("SNR {snr_db} dB (Γ = {gamma:.4})");
    println!(
        "{:>6} {:>12} {:>12} {:>12} {:>12}",
        "a", "P", "Re", "R̃e", "K [nats]"
    );
    for a in [0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 0.99, 0.999, 1.0] {
        let model: Model = ScalarModel::from_snr(a, gamma)?.into();
        let ss = innovation_variances(&model)?;
        let k = error_exponent_closed(&model)?;
        println!(
            "{a:>6} {:>12.6} {:>12.6} {:>12.6} {k:>12.8}",
            ss.observed_p(&model),
            ss.re,
            ss.re_tilde
        );
    }
    // i.i.d. signal: Stein's lemma for N(0, σ²) vs N(0, Π0 + σ²).
    let stein = 0.5 * gamma.ln_1p() + 0.5 / (1.0 + gamma) - 0.5;
    println!("a = 0 Gaussian divergence: {stein:.12}");
    Ok(())
}
