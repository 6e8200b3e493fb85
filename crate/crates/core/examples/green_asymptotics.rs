//! Truncated Green functions, the covariance Γ_N and the lattice residual.

use std::f64::consts::PI;

use sgwave::covariance::{covariance_gamma, dyadic_probes, hrw_check, truncated_green, HRW_RATIO_BOUND};
use sgwave::renorm::sigma_exact;
use sgwave::spectral::TorusGrid;

fn main() -> sgwave::Result<()> {
    for n in [32, 64, 128, 256] {
        let g = TorusGrid::resolving(n);
        let green = truncated_green(n, &g)?;
        let offsets: Vec<f64> = dyadic_probes(&g)
            .into_iter()
            .map(|(i, r)| green.values[i] + (r + 1.0 / n as f64).ln() / (2.0 * PI))
            .collect();
        let lo = offsets.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = offsets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let gamma = covariance_gamma(0.5, n, &g)?;
        println!(
            "N = {n:>3}: G_N(0) = {:.5}, log-law offsets in [{lo:.4}, {hi:.4}], Γ_N(0.5, 0) = {:.5} = σ_N {}",
            green.at_origin(),
            gamma.at_origin(),
            if gamma.at_origin() == sigma_exact(0.5, n, &g)? { "(bitwise)" } else { "" }
        );
    }

    for a in [1.0, 16.0, 256.0] {
        for r in [1.0, 100.0] {
            let res = hrw_check(a, r)?;
            println!(
                "a = {a:>5}, R = {r:>5}: residual {:.5}, ratio to bound {:.3} (C = {HRW_RATIO_BOUND})",
                res.residual,
                res.ratio()
            );
        }
    }
    Ok(())
}
