//! Curve data behind the exponent plots, written as CSV to a directory.
//! The Monte Carlo curves are left to `gm-exponent figures`.
//!
//!     cargo run --example figure_data -- out/

use gm_exponent::cli::{optimal_a, sweep_a, sweep_snr, write_atomic};

fn main() -> gm_exponent::Result<()> {
    let dir = std::path::PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "figure_data".into()),
    );
    std::fs::create_dir_all(&dir)?;

    for db in [10.0, -3.0, -6.0, -9.0] {
        let mut csv = String::from("a,k_nats,dk_da\n");
        for r in sweep_a(db, 201)? {
            csv += &format!(
                "{},{},{}\n",
                r.a,
                r.k,
                r.dk_da.map(|d| d.to_string()).unwrap_or_default()
            );
        }
        write_atomic(&dir.join(format!("k_vs_a_{db}db.csv")), &csv)?;
    }

    let mut csv = String::from("snr_db,a_star,k_at_star_nats\n");
    for r in optimal_a(-20.0, 10.0, 61)? {
        csv += &format!("{},{},{}\n", r.snr_db, r.a_star, r.k_at_star);
    }
    write_atomic(&dir.join("a_star_vs_snr.csv"), &csv)?;

    let mut csv = String::from("snr_db,k_nats,k_asymptote_nats\n");
    for r in sweep_snr((-1f64).exp(), -10.0, 30.0, 81)? {
        csv += &format!(
            "{},{},{}\n",
            r.snr_db,
            r.k,
            r.asymptote.map(|d| d.to_string()).unwrap_or_default()
        );
    }
    write_atomic(&dir.join("k_vs_snr.csv"), &csv)?;

    println!("wrote curve data to {}", dir.display());
    Ok(())
}
