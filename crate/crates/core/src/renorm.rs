//! Time-dependent Wick renormalization.
//!
//! σ_N(t) = E[Ψ_N(t, x)²] grows like (t/4π) log N; Wick powers subtract it
//! through the Hermite polynomials H_k(x; σ), and the renormalized complex
//! exponential is Θ_N = γ_N e^{iβΨ_N} with γ_N(t, β) = e^{β²σ_N(t)/2}.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::spectral::{bracket, chi, TorusGrid};
use crate::stoch_conv::psi_variance_factor;
use crate::{Error, Result};

/// Largest Hermite degree supported by [`hermite`].
pub const MAX_HERMITE_DEGREE: usize = 60;

/// Above this value of β²σ_N the constant is only reported in log scale.
pub const LOG_SCALE_THRESHOLD: f64 = 30.0;

/// Σ over the lattice points with χ_N(n) > 0, in a fixed row-major order
/// (n₁ then n₂ ascending) so every caller sees the same rounding.
pub(crate) fn lattice_sum(big_n: usize, f: impl Fn([i64; 2]) -> f64 + Sync) -> f64 {
    let r = big_n as i64;
    let rows: Vec<f64> = (-r..=r)
        .into_par_iter()
        .map(|n1| {
            let mut acc = 0.0;
            for n2 in -r..=r {
                let n = [n1, n2];
                if n1 * n1 + n2 * n2 < r * r {
                    acc += f(n);
                }
            }
            acc
        })
        .collect();
    rows.iter().sum()
}

/// σ_N(t) = (1/4π²) Σ_n χ_N²(n) [t/(2⟨n⟩²) − sin(2t⟨n⟩)/(4⟨n⟩³)].
pub fn sigma_exact(t: f64, big_n: usize, grid: &TorusGrid) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("σ_N needs t >= 0, got {t}")));
    }
    if big_n == 0 {
        return Err(Error::InvalidParameter("truncation N must be >= 1".into()));
    }
    grid.check_resolves(big_n)?;
    Ok(sigma_unchecked(t, big_n))
}

pub(crate) fn sigma_unchecked(t: f64, big_n: usize) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let four_pi2 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
    lattice_sum(big_n, |n| chi(n, big_n).powi(2) * psi_variance_factor(t, bracket(n))) / four_pi2
}

/// Cached lattice data for repeated σ_N(t) evaluations at one N. Sums in
/// the same order as [`sigma_exact`], so the values agree bitwise.
#[derive(Debug, Clone)]
pub struct SigmaTable {
    big_n: usize,
    // per row n₁: (χ_N²(n), ⟨n⟩) for the admissible n₂
    rows: Vec<Vec<(f64, f64)>>,
}

impl SigmaTable {
    pub fn new(big_n: usize, grid: &TorusGrid) -> Result<Self> {
        if big_n == 0 {
            return Err(Error::InvalidParameter("truncation N must be >= 1".into()));
        }
        grid.check_resolves(big_n)?;
        let r = big_n as i64;
        let rows = (-r..=r)
            .into_par_iter()
            .map(|n1| {
                (-r..=r)
                    .filter(|n2| n1 * n1 + n2 * n2 < r * r)
                    .map(|n2| (chi([n1, n2], big_n).powi(2), bracket([n1, n2])))
                    .collect()
            })
            .collect();
        Ok(Self { big_n, rows })
    }

    pub fn truncation(&self) -> usize {
        self.big_n
    }

    pub fn sigma(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter(format!("σ_N needs t >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        let four_pi2 = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
        let rows: Vec<f64> = self
            .rows
            .par_iter()
            .map(|row| {
                let mut acc = 0.0;
                for &(c2, w) in row {
                    acc += c2 * psi_variance_factor(t, w);
                }
                acc
            })
            .collect();
        Ok(rows.iter().sum::<f64>() / four_pi2)
    }
}

/// γ_N(t, β), held as its logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenormConstant {
    log_value: f64,
}

impl RenormConstant {
    pub fn from_log(log_value: f64) -> Self {
        Self { log_value }
    }

    pub fn ln(&self) -> f64 {
        self.log_value
    }

    /// γ itself; `inf` once it leaves the f64 range.
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }

    /// γ⁻¹ ∈ (0, 1].
    pub fn inverse(&self) -> f64 {
        (-self.log_value).exp()
    }

    /// True when β²σ_N exceeds [`LOG_SCALE_THRESHOLD`] and the value should
    /// be read from [`RenormConstant::ln`].
    pub fn is_log_scale(&self) -> bool {
        2.0 * self.log_value > LOG_SCALE_THRESHOLD
    }
}

/// γ_N(t, β) = exp(β²σ_N(t)/2).
pub fn gamma_exact(t: f64, beta: f64, big_n: usize, grid: &TorusGrid) -> Result<RenormConstant> {
    let sigma = sigma_exact(t, big_n, grid)?;
    Ok(RenormConstant::from_log(0.5 * beta * beta * sigma))
}

/// H_k(x; σ) from H₀ = 1, H₁ = x, H_{k+1} = x H_k − kσ H_{k−1}.
pub fn hermite(k: usize, x: f64, sigma: f64) -> Result<f64> {
    if k > MAX_HERMITE_DEGREE {
        return Err(Error::InvalidParameter(format!(
            "Hermite degree {k} beyond supported range 0..={MAX_HERMITE_DEGREE}"
        )));
    }
    Ok(hermite_unchecked(k, x, sigma))
}

fn hermite_unchecked(k: usize, x: f64, sigma: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if k == 0 {
        return prev;
    }
    for j in 1..k {
        let next = x * cur - j as f64 * sigma * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Σ_{k ≤ K} t^k/k! H_k(x; σ), the truncated generating function of the
/// Hermite polynomials; it tends to e^{tx − σt²/2} as K → ∞.
pub fn hermite_generating_sum(t: f64, x: f64, sigma: f64, terms: usize) -> Result<f64> {
    if terms > MAX_HERMITE_DEGREE {
        return Err(Error::InvalidParameter(format!(
            "series length {terms} beyond supported range"
        )));
    }
    let (mut prev, mut cur) = (1.0, x);
    let mut sum = 1.0;
    let mut tk = 1.0;
    for k in 1..=terms {
        tk *= t / k as f64;
        if k > 1 {
            let next = x * cur - (k - 1) as f64 * sigma * prev;
            prev = cur;
            cur = next;
        }
        sum += tk * cur;
    }
    Ok(sum)
}

/// :ψ^k: = H_k(ψ; σ) pointwise.
pub fn wick_power(psi: &[f64], k: usize, sigma: f64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Wick ordering needs σ >= 0, got {sigma}"
        )));
    }
    if k > MAX_HERMITE_DEGREE {
        return Err(Error::InvalidParameter(format!(
            "Hermite degree {k} beyond supported range 0..={MAX_HERMITE_DEGREE}"
        )));
    }
    Ok(psi.iter().map(|&x| hermite_unchecked(k, x, sigma)).collect())
}

/// Σ_{k ≤ K} (iβ)^k/k! :ψ^k: pointwise, the truncated Wick series of Θ.
pub fn wick_exponential_series(psi: &[f64], beta: f64, sigma: f64, terms: usize) -> Result<Vec<Complex64>> {
    if terms > MAX_HERMITE_DEGREE {
        return Err(Error::InvalidParameter(format!(
            "series length {terms} beyond supported range"
        )));
    }
    Ok(psi
        .iter()
        .map(|&x| {
            let mut sum = Complex64::default();
            let mut coeff = Complex64::new(1.0, 0.0);
            let (mut prev, mut cur) = (1.0, x);
            for k in 0..=terms {
                let h = if k == 0 { prev } else { cur };
                sum += coeff * h;
                coeff *= Complex64::new(0.0, beta) / (k + 1) as f64;
                if k >= 1 {
                    let next = x * cur - k as f64 * sigma * prev;
                    prev = cur;
                    cur = next;
                }
            }
            sum
        })
        .collect())
}

/// Θ_N(t, ·) on the grid, stored as the unit phase e^{iβψ} and log γ so
/// that the modulus never overflows.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosField {
    phase: Vec<Complex64>,
    gamma: RenormConstant,
    pub t: f64,
    pub beta: f64,
    pub big_n: usize,
    pub sigma: f64,
}

impl ChaosField {
    /// Assembles a field from an arbitrary phase and log-modulus. Used for
    /// manufactured forcings; the stochastic path goes through
    /// [`theta_field`].
    pub fn from_parts(phase: Vec<Complex64>, log_gamma: f64, t: f64, beta: f64, big_n: usize, sigma: f64) -> Self {
        Self {
            phase,
            gamma: RenormConstant::from_log(log_gamma),
            t,
            beta,
            big_n,
            sigma,
        }
    }

    /// e^{iβψ(x)} at each grid point.
    pub fn phase(&self) -> &[Complex64] {
        &self.phase
    }

    pub fn gamma(&self) -> RenormConstant {
        self.gamma
    }

    /// Same phase with γ replaced.
    pub fn with_log_gamma(&self, log_gamma: f64) -> Self {
        Self {
            gamma: RenormConstant::from_log(log_gamma),
            ..self.clone()
        }
    }

    /// Θ values γ·e^{iβψ}.
    pub fn values(&self) -> Vec<Complex64> {
        let g = self.gamma.value();
        self.phase.iter().map(|p| p * g).collect()
    }

    /// max_x ||Θ(x)| − γ| / γ.
    pub fn modulus_defect(&self) -> f64 {
        let g = self.gamma.value();
        self.values()
            .iter()
            .map(|v| (v.norm() - g).abs() / g)
            .fold(0.0, f64::max)
    }
}

/// Θ_N = γ_N(t, β) e^{iβψ}, with σ_N(t) computed from the lattice sum.
pub fn theta_field(psi: &[f64], t: f64, beta: f64, big_n: usize, grid: &TorusGrid) -> Result<ChaosField> {
    let sigma = sigma_exact(t, big_n, grid)?;
    theta_with_sigma(psi, t, beta, big_n, sigma)
}

/// Θ with an explicitly supplied σ (the caller is responsible for it
/// matching ψ's law).
pub fn theta_with_sigma(psi: &[f64], t: f64, beta: f64, big_n: usize, sigma: f64) -> Result<ChaosField> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("σ must be >= 0, got {sigma}")));
    }
    let phase = psi
        .iter()
        .map(|&x| Complex64::from_polar(1.0, beta * x))
        .collect();
    Ok(ChaosField::from_parts(phase, 0.5 * beta * beta * sigma, t, beta, big_n, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn sigma_basics() {
        let g = TorusGrid::resolving(16);
        assert_eq!(sigma_exact(0.0, 16, &g).unwrap(), 0.0);
        assert!(sigma_exact(0.5, 64, &g).is_err());
        assert!(sigma_exact(-0.1, 16, &g).is_err());
        // strictly increasing on (0, 1]
        let mut prev = 0.0;
        for k in 1..=200 {
            let s = sigma_exact(k as f64 / 200.0, 16, &g).unwrap();
            assert!(s > prev);
            prev = s;
        }
    }

    #[test]
    fn sigma_matches_direct_sum() {
        // independent oracle: brute-force loop over the full square
        let (t, n) = (0.7, 10usize);
        let g = TorusGrid::resolving(n);
        let mut acc = 0.0;
        for n1 in -20i64..=20 {
            for n2 in -20i64..=20 {
                let w = ((1 + n1 * n1 + n2 * n2) as f64).sqrt();
                let c = SmoothOracle::chi((n1 * n1 + n2 * n2) as f64, n as f64);
                acc += c * c * (t / (2.0 * w * w) - (2.0 * t * w).sin() / (4.0 * w.powi(3)));
            }
        }
        acc /= 4.0 * PI * PI;
        assert_relative_eq!(sigma_exact(t, n, &g).unwrap(), acc, max_relative = 1e-12);
    }

    struct SmoothOracle;
    impl SmoothOracle {
        fn chi(r2: f64, n: f64) -> f64 {
            let r = r2.sqrt() / n;
            if r <= 0.5 {
                1.0
            } else if r >= 1.0 {
                0.0
            } else {
                let a = (-1.0 / (2.0 - 2.0 * r)).exp();
                let b = (-1.0 / (2.0 * r - 1.0)).exp();
                a / (a + b)
            }
        }
    }

    #[test]
    fn sigma_table_is_bitwise() {
        let g = TorusGrid::resolving(24);
        let table = SigmaTable::new(24, &g).unwrap();
        for t in [0.0, 0.01, 0.3, 2.0] {
            assert_eq!(table.sigma(t).unwrap(), sigma_exact(t, 24, &g).unwrap());
        }
    }

    #[test]
    fn gamma_basics() {
        let g = TorusGrid::resolving(32);
        assert_eq!(gamma_exact(0.0, 2.0, 32, &g).unwrap().value(), 1.0);
        assert_eq!(gamma_exact(0.4, 0.0, 32, &g).unwrap().value(), 1.0);
        let big = RenormConstant::from_log(800.0);
        assert!(big.is_log_scale());
        assert!(big.value().is_infinite());
        assert_eq!(big.ln(), 800.0);
        assert!(big.inverse() >= 0.0 && big.inverse() <= 1.0);
    }

    #[test]
    fn hermite_values() {
        assert_eq!(hermite(0, 3.0, 2.0).unwrap(), 1.0);
        assert_eq!(hermite(1, 3.0, 2.0).unwrap(), 3.0);
        for (x, s) in [(0.3, 0.0), (1.5, 0.7), (-2.0, 2.0)] {
            assert_relative_eq!(hermite(2, x, s).unwrap(), x * x - s, max_relative = 1e-15);
            assert_relative_eq!(hermite(3, x, s).unwrap(), x * x * x - 3.0 * s * x, epsilon = 1e-14);
        }
        assert!(hermite(61, 0.0, 1.0).is_err());
    }

    fn partial_sum(t: f64, x: f64, s: f64, terms: usize) -> f64 {
        let mut sum = 0.0;
        let mut tk = 1.0;
        for k in 0..=terms {
            sum += tk * hermite(k, x, s).unwrap();
            tk *= t / (k + 1) as f64;
        }
        sum
    }

    #[test]
    fn generating_sum_matches_termwise() {
        for (t, x, s) in [(0.7, -1.2, 0.4), (-2.0, 2.0, 2.0), (1.5, 0.0, 0.0)] {
            for terms in [0, 1, 2, 10, 40] {
                let a = hermite_generating_sum(t, x, s, terms).unwrap();
                assert_relative_eq!(a, partial_sum(t, x, s, terms), max_relative = 1e-12, epsilon = 1e-14);
            }
        }
        assert!(hermite_generating_sum(1.0, 1.0, 1.0, MAX_HERMITE_DEGREE + 1).is_err());
    }

    #[test]
    fn generating_function_partial_sums() {
        let pts: Vec<f64> = (0..=8).map(|i| -2.0 + 0.5 * i as f64).collect();
        let mut worst: f64 = 0.0;
        for &t in &pts {
            for &x in &pts {
                for (s, terms) in [(0.0, 40), (0.5, 40), (1.0, 40), (1.5, 40), (2.0, 60)] {
                    let exact = (t * x - 0.5 * s * t * t).exp();
                    worst = worst.max((partial_sum(t, x, s, terms) - exact).abs());
                }
            }
        }
        assert!(worst < 1e-8, "worst {worst}");
    }

    #[test]
    fn forty_term_tail_at_corner() {
        // 50-digit reference for e^{tx−σt²/2} − Σ_{k≤40} t^k H_k(x;σ)/k!
        // at t = x = −2, σ = 2
        let tail = (4.0f64 - 4.0).exp() - partial_sum(-2.0, -2.0, 2.0, 40);
        assert_relative_eq!(tail.abs(), 2.161_796_164_279_693e-7, max_relative = 1e-6);
    }

    #[test]
    fn wick_power_edges() {
        let psi = vec![0.5, -1.0, 2.0];
        assert_eq!(wick_power(&psi, 1, 0.3).unwrap(), psi);
        assert_eq!(wick_power(&psi, 0, 0.3).unwrap(), vec![1.0; 3]);
        assert!(wick_power(&psi, 2, -0.1).is_err());
    }

    #[test]
    fn theta_modulus_and_zero_field() {
        let g = TorusGrid::resolving(8);
        let theta = theta_field(&vec![0.0; g.len()], 0.0, 1.3, 8, &g).unwrap();
        assert!(theta.values().iter().all(|v| *v == Complex64::new(1.0, 0.0)));

        let psi: Vec<f64> = (0..g.len()).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let theta = theta_field(&psi, 0.6, PI.sqrt(), 8, &g).unwrap();
        assert!(theta.modulus_defect() < 1e-12);
        let expected = gamma_exact(0.6, PI.sqrt(), 8, &g).unwrap();
        assert_eq!(theta.gamma(), expected);
    }

    #[test]
    fn wick_series_reproduces_theta() {
        let beta = 1.2;
        let sigma = 0.4;
        let psi: Vec<f64> = (0..41).map(|i| -3.3 + 0.165 * i as f64).collect();
        let series = wick_exponential_series(&psi, beta, sigma, 40).unwrap();
        let theta = theta_with_sigma(&psi, 0.0, beta, 1, sigma).unwrap();
        for (a, b) in series.iter().zip(theta.values()) {
            assert!((a - b).norm() < 1e-10 * b.norm());
        }
    }
}

#[cfg(test)]
mod props {
    use proptest::prelude::*;

    use super::*;

    proptest! {
        #[test]
        fn generating_sum_is_the_termwise_sum(
            t in -1.0f64..1.0, x in -2.0f64..2.0, sigma in 0.0f64..2.0, k in 0usize..30,
        ) {
            let direct: f64 = (0..=k)
                .map(|j| {
                    let fact: f64 = (1..=j).map(|i| i as f64).product();
                    t.powi(j as i32) / fact * hermite(j, x, sigma).unwrap()
                })
                .sum();
            let sum = hermite_generating_sum(t, x, sigma, k).unwrap();
            prop_assert!((sum - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }
}
