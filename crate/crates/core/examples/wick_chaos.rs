//! Hermite polynomials, Wick powers and the imaginary chaos Θ_N of a sample.

use std::f64::consts::PI;

use sgwave::noise::NoiseStream;
use sgwave::renorm::{gamma_exact, hermite, hermite_generating_sum, sigma_exact, theta_field, wick_power};
use sgwave::spectral::{quadrature, TorusGrid};
use sgwave::stoch_conv::ConvolutionState;

fn main() -> sgwave::Result<()> {
    for k in 0..5 {
        println!("H_{k}(1.5; 0.5) = {:+.6}", hermite(k, 1.5, 0.5)?);
    }
    let (t, x, s) = (0.7, -1.2, 1.0);
    println!(
        "generating sum, 30 terms: {:.12} vs exp(tx - σt²/2) = {:.12}",
        hermite_generating_sum(t, x, s, 30)?,
        (t * x - 0.5 * s * t * t).exp()
    );

    let (n, time, beta) = (32, 0.5, PI.sqrt());
    let g = TorusGrid::resolving(n);
    let mut st = ConvolutionState::new(&g, n, NoiseStream::new(3, 0, 0))?;
    st.advance(time)?;
    let psi = st.psi_field();
    let sigma = sigma_exact(time, n, &g)?;
    for k in 1..=3 {
        let w = wick_power(&psi, k, sigma)?;
        println!("spatial mean of :Ψ^{k}: = {:+.5}", quadrature(&g, &w) / (4.0 * PI * PI));
    }

    let gamma = gamma_exact(time, beta, n, &g)?;
    let theta = theta_field(&psi, time, beta, n, &g)?;
    println!("γ_N = {:.4} (ln {:.4})", gamma.value(), gamma.ln());
    println!("|Θ_N| / γ_N defect from 1: {:.2e}", theta.modulus_defect());
    println!("Θ_N(t, 0) = {:.4}", theta.values()[0]);
    Ok(())
}
