//! The exponent as a frequency-domain integral, checked against the
//! innovations closed form.

use gm_exponent::exponent::{error_exponent_spectral, DEFAULT_NODES};
use gm_exponent::{error_exponent_closed, Model, ScalarModel};

fn main() -> gm_exponent::Result<()> {
    println!(
        "{:>6} {:>6} {:>20} {:>20} {:>10} {:>8}",
        "a", "Γ", "closed", "spectral", "|diff|", "nodes"
    );
    for gamma in [0.1, 1.0, 10.0] {
        for a in [0.0, 0.5, 0.9, 0.99, 0.999] {
            let model: Model = ScalarModel::from_snr(a, gamma)?.into();
            let closed = error_exponent_closed(&model)?;
            let spectral = error_exponent_spectral(&model, DEFAULT_NODES)?;
            println!(
                "{a:>6} {gamma:>6} {closed:>20.15} {:>20.15} {:>10.2e} {:>8}",
                spectral.value,
                (closed - spectral.value).abs(),
                spectral.nodes
            );
        }
    }
    let degenerate: Model = ScalarModel::from_snr(1.0, 1.0)?.into();
    match error_exponent_spectral(&degenerate, DEFAULT_NODES) {
        Err(e) => println!("a = 1: {e}"),
        Ok(r) => println!("a = 1: unexpected value {}", r.value),
    }
    Ok(())
}
