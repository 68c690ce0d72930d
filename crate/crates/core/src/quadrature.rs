//! Trapezoidal rule for the mean of a 2π-periodic function, with node
//! doubling as the error estimate.

use std::f64::consts::TAU;

use serde::Serialize;

use crate::error::{Error, Result};

/// Doubling stops with an error beyond this many nodes.
pub const MAX_NODES: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodicMean {
    pub value: f64,
    /// Node count of the accepted estimate.
    pub nodes: usize,
    /// `|I_N − I_{N/2}|` at acceptance.
    pub last_change: f64,
}

/// `(1/2π) ∫₀^{2π} f(ω) dω` on a uniform grid of `[0, 2π)`, starting at
/// `start_nodes` (a power of two) and doubling until successive estimates
/// differ by less than `tol · (1 + |I|)`.
pub fn periodic_mean<F>(f: F, start_nodes: usize, tol: f64) -> Result<PeriodicMean>
where
    F: Fn(f64) -> Result<f64>,
{
    if start_nodes < 2 || !start_nodes.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "node count must be a power of two >= 2, got {start_nodes}"
        )));
    }
    let mut nodes = start_nodes;
    let mut sum = 0.0;
    for k in 0..nodes {
        sum += f(TAU * k as f64 / nodes as f64)?;
    }
    let mut value = sum / nodes as f64;
    loop {
        if nodes * 2 > MAX_NODES {
            return Err(Error::NoConvergence {
                solver: "trapezoidal quadrature",
                iterations: nodes,
                last_change: f64::NAN,
            });
        }
        let fine = nodes * 2;
        let step = TAU / fine as f64;
        for k in (1..fine).step_by(2) {
            sum += f(step * k as f64)?;
        }
        let refined = sum / fine as f64;
        let change = (refined - value).abs();
        value = refined;
        nodes = fine;
        if change < tol * (1.0 + value.abs()) {
            return Ok(PeriodicMean {
                value,
                nodes,
                last_change: change,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_is_exact() {
        let r = periodic_mean(|_| Ok(2.5), 64, 1e-12).unwrap();
        assert_eq!(r.value, 2.5);
        assert_eq!(r.nodes, 128);
    }

    #[test]
    fn poisson_kernel_mean() {
        // (1/2π)∫ (1 − a²)/(1 − 2a cos ω + a²) dω = 1.
        let a: f64 = 0.9;
        let r = periodic_mean(
            |w| Ok((1.0 - a * a) / (1.0 - 2.0 * a * w.cos() + a * a)),
            64,
            1e-13,
        )
        .unwrap();
        assert_relative_eq!(r.value, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn rejects_bad_node_count() {
        assert!(periodic_mean(|_| Ok(1.0), 100, 1e-10).is_err());
    }
}
