//! Pseudospectral simulation of the two-dimensional hyperbolic stochastic
//! sine-Gordon equation
//!
//! ```text
//! ∂²ₜu + (1 − Δ)u + γ_N sin(βu) = P_N ξ    on ℝ₊ × 𝕋²
//! ```
//!
//! with the time-dependent renormalization γ_N(t, β) = exp(β²σ_N(t)/2),
//! together with the deterministic lattice-sum oracles used to check every
//! Monte Carlo estimate.
//!
//! The crate is organised bottom-up:
//!
//! - [`spectral`]: torus grids, Fourier transforms normalised against
//!   e_n(x) = (2π)⁻¹e^{in·x}, Fourier multipliers and Sobolev norms.
//! - [`noise`]: counter-keyed Gaussian noise per Fourier mode.
//! - [`stoch_conv`]: exact-in-law sampling of the truncated stochastic
//!   convolution Ψ_N and its time derivative.
//! - [`renorm`]: σ_N(t), γ_N(t, β), Hermite polynomials, Wick powers and the
//!   imaginary multiplicative chaos Θ_N.
//! - [`covariance`]: truncated Green functions, the covariance Γ_N, Bessel
//!   kernels and the lattice-sum residual check.
//! - [`chaos`]: charge-cancellation bounds and exact/Monte Carlo moments of Θ_N.
//! - [`solver`]: the linear Klein–Gordon propagator, the Duhamel stepper for
//!   the remainder v_N = u_N − Ψ_N, Picard diagnostics, Strichartz pairs and
//!   the triviality experiment.
//! - [`experiment`]: TOML-configured experiment runner behind the `sgwave`
//!   binary.

pub mod chaos;
pub mod covariance;
mod error;
pub mod experiment;
pub mod noise;
pub mod renorm;
pub mod spectral;
pub mod stats;
pub mod stoch_conv;
pub mod solver;

pub use error::{Error, Result};
pub use num_complex::Complex64;
