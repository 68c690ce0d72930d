//! Second-order autoregressive signal as a two-state model: Riccati and
//! Lyapunov solutions, both exponent routes, and a JSON round trip.

use gm_exponent::exponent::DEFAULT_NODES;
use gm_exponent::model::random_stable_model;
use gm_exponent::steady_state::solve_dare;
use gm_exponent::{exponent_report, innovation_variances, Model, VectorModel};
use nalgebra::{dmatrix, dvector};

fn main() -> gm_exponent::Result<()> {
    // s_{i+1} = 1.2 s_i − 0.5 s_{i−1} + u_i, observed as s_i + w_i.
    let model = VectorModel::new(
        dmatrix![1.2, -0.5; 1.0, 0.0],
        dmatrix![1.0; 0.0],
        dmatrix![1.0],
        dvector![1.0, 0.0],
        2.0,
    )?;
    println!(
        "spectral radius {:.6}, SNR {:.6}",
        model.spectral_radius(),
        model.snr()
    );
    println!("Π0 = {:.6}", model.pi0());

    let dare = solve_dare(&model)?;
    println!(
        "Riccati: {} iterations, residual {:.2e}, closed-loop radius {:.6}",
        dare.iterations, dare.residual, dare.closed_loop_radius
    );

    let report = exponent_report(&Model::from(model.clone()), DEFAULT_NODES)?;
    println!("Re = {:.12}, R̃e = {:.12}", report.re, report.re_tilde);
    println!("K closed   = {:.15}", report.k_closed);
    println!("K spectral = {:.15}", report.k_spectral.unwrap_or(f64::NAN));

    let text = serde_json::to_string(&model.to_document())?;
    println!("JSON: {text}");
    let back = VectorModel::from_json(&text)?;
    assert_eq!(back.a(), model.a());

    println!();
    println!("random stable models (radius 0.9):");
    for seed in 0..5 {
        let m = random_stable_model(seed, 2 + seed as usize, 2, 0.9)?;
        let ss = innovation_variances(&Model::from(m))?;
        println!(
            "  seed {seed}: m = {}, Re = {:.6}, R̃e = {:.6}, Riccati residual {:.1e}, Lyapunov residual {:.1e}",
            2 + seed,
            ss.re,
            ss.re_tilde,
            ss.diagnostics.riccati_residual,
            ss.diagnostics.lyapunov_residual
        );
    }
    Ok(())
}
