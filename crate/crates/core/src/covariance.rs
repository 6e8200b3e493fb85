//! Deterministic kernels on the torus, all built by direct lattice summation:
//! truncated Green functions of 1 − Δ, the covariance Γ_N(t, ·) of Ψ_N,
//! truncated Bessel-potential kernels, and the lattice residual check.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::renorm::lattice_sum;
use crate::spectral::{bracket, chi, inverse_transform, SpectralField, TorusGrid};
use crate::stoch_conv::psi_variance_factor;
use crate::{Error, Result};

/// What a [`KernelTable`] holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    /// P_N²G.
    Green { n: usize },
    /// P_{N₁}P_{N₂}G.
    CrossGreen { n1: usize, n2: usize },
    /// Γ_N(t, ·).
    Covariance { t: f64, n: usize },
    /// P_{N₁}P_{N₂}Γ(t, ·) = E[Ψ_{N₁}(t, x)Ψ_{N₂}(t, y)] as a function of x − y.
    CrossCovariance { t: f64, n1: usize, n2: usize },
    /// Truncated Bessel kernel J_α.
    Bessel { alpha: f64, n_sum: usize },
}

/// Real kernel values on every grid point, indexed like the grid.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub grid: TorusGrid,
    pub kind: KernelKind,
    pub values: Vec<f64>,
}

impl KernelTable {
    pub fn at_origin(&self) -> f64 {
        self.values[0]
    }

    /// Value at the grid point displaced from the origin by `offset` cells.
    pub fn at_offset(&self, offset: [i64; 2]) -> f64 {
        self.values[self.grid.shift_point(0, offset)]
    }

    /// max |K(x) − K(−x)| / max |K|.
    pub fn even_defect(&self) -> f64 {
        let scale = self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let worst = (0..self.values.len())
            .map(|i| (self.values[i] - self.values[self.grid.reflect_point(i)]).abs())
            .fold(0.0, f64::max);
        worst / scale.max(f64::MIN_POSITIVE)
    }

    /// Grid quadrature of |K|.
    pub fn l1_norm(&self) -> f64 {
        self.grid.cell_area() * self.values.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// CSV rows `x1,x2,value` with one header row.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "x1,x2,value")?;
        for (i, v) in self.values.iter().enumerate() {
            let x = self.grid.point(i);
            writeln!(out, "{:.17e},{:.17e},{:.17e}", x[0], x[1], v)?;
        }
        Ok(())
    }
}

/// (1/4π²) Σ_n symbol(n) e^{in·x} on the grid for a real, even symbol
/// supported in |n| < `support`. The origin value is replaced by the
/// ordered lattice sum so that it agrees bitwise with [`crate::renorm::sigma_exact`]
/// and friends.
fn lattice_kernel(
    grid: &TorusGrid,
    support: usize,
    kind: KernelKind,
    symbol: impl Fn([i64; 2]) -> f64 + Sync,
) -> Result<KernelTable> {
    grid.check_resolves(support)?;
    let coeffs = SpectralField::from_symbol(grid, true, |n| {
        Complex64::new(symbol(n) / (2.0 * PI), 0.0)
    });
    let mut values = inverse_transform(&coeffs)?;
    values[0] = lattice_sum(support, &symbol) / (4.0 * PI * PI);
    Ok(KernelTable {
        grid: grid.clone(),
        kind,
        values,
    })
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidParameter("truncation N must be >= 1".into()))
    } else {
        Ok(())
    }
}

fn check_pair(n1: usize, n2: usize) -> Result<()> {
    check_n(n1)?;
    if n2 < n1 {
        return Err(Error::InvalidParameter(format!(
            "cross kernels need N2 >= N1, got N1 = {n1}, N2 = {n2}"
        )));
    }
    Ok(())
}

fn check_t(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")))
    }
}

/// P_N²G(x) = (1/4π²) Σ χ_N²(n) ⟨n⟩⁻² e^{in·x}.
pub fn truncated_green(big_n: usize, grid: &TorusGrid) -> Result<KernelTable> {
    check_n(big_n)?;
    lattice_kernel(grid, big_n, KernelKind::Green { n: big_n }, |n| {
        chi(n, big_n).powi(2) / (1 + n[0] * n[0] + n[1] * n[1]) as f64
    })
}

/// P_{N₁}P_{N₂}G with multiplier χ_{N₁}χ_{N₂}; needs N₂ ≥ N₁.
pub fn cross_green(n1: usize, n2: usize, grid: &TorusGrid) -> Result<KernelTable> {
    check_pair(n1, n2)?;
    lattice_kernel(grid, n1, KernelKind::CrossGreen { n1, n2 }, |n| {
        chi(n, n1) * chi(n, n2) / (1 + n[0] * n[0] + n[1] * n[1]) as f64
    })
}

/// Γ_N(t, x) = (1/4π²) Σ χ_N²(n)[t/(2⟨n⟩²) − sin(2t⟨n⟩)/(4⟨n⟩³)] e^{in·x}.
pub fn covariance_gamma(t: f64, big_n: usize, grid: &TorusGrid) -> Result<KernelTable> {
    check_t(t)?;
    check_n(big_n)?;
    lattice_kernel(grid, big_n, KernelKind::Covariance { t, n: big_n }, |n| {
        chi(n, big_n).powi(2) * psi_variance_factor(t, bracket(n))
    })
}

/// Cross covariance E[Ψ_{N₁}(t, x)Ψ_{N₂}(t, y)] as a kernel in x − y.
pub fn cross_gamma(t: f64, n1: usize, n2: usize, grid: &TorusGrid) -> Result<KernelTable> {
    check_t(t)?;
    check_pair(n1, n2)?;
    lattice_kernel(grid, n1, KernelKind::CrossCovariance { t, n1, n2 }, |n| {
        chi(n, n1) * chi(n, n2) * psi_variance_factor(t, bracket(n))
    })
}

/// J_α(x) truncated at N_sum: (1/2π) Σ χ_{N_sum}(n) ⟨n⟩^{−α} e_n(x), 0 < α < 2.
pub fn bessel_kernel(alpha: f64, grid: &TorusGrid, n_sum: usize) -> Result<KernelTable> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "Bessel kernel needs 0 < α < 2, got {alpha}"
        )));
    }
    check_n(n_sum)?;
    lattice_kernel(grid, n_sum, KernelKind::Bessel { alpha, n_sum }, |n| {
        chi(n, n_sum) * bracket(n).powf(-alpha)
    })
}

/// Recorded bound on the spread of P_N²G(x) + (1/2π) log(|x| + 1/N) over the
/// dyadic probes and N ∈ {32, …, 512} (observed: 0.109).
pub const GREEN_SPREAD_BOUND: f64 = 0.15;

/// Recorded constant for [`hrw_check`]: at R = 1 the ratio tends to 5 − π as
/// a → ∞, the largest value seen on a, R ∈ [1, 1000].
pub const HRW_RATIO_BOUND: f64 = 2.0;

/// Lattice residual |Σ_{|n|≤R} 1/(a + |n|²) − π log(1 + R²/a)| next to the
/// bound shape min(1, R/√a)/√a.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct HrwResidual {
    pub a: f64,
    pub r: f64,
    pub residual: f64,
    pub bound: f64,
}

impl HrwResidual {
    /// residual / bound: the constant C the estimate needs at (a, R).
    pub fn ratio(&self) -> f64 {
        self.residual / self.bound
    }
}

pub fn hrw_check(a: f64, r: f64) -> Result<HrwResidual> {
    if !(a >= 1.0 && r >= 1.0 && a.is_finite() && r.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lattice residual needs a, R >= 1, got a = {a}, R = {r}"
        )));
    }
    let rr = r * r;
    let rmax = r.floor() as i64;
    let mut sum = 0.0;
    for n1 in -rmax..=rmax {
        let rest = rr - (n1 * n1) as f64;
        let mut m = rest.max(0.0).sqrt().floor() as i64;
        while ((m + 1) * (m + 1)) as f64 <= rest {
            m += 1;
        }
        while m > 0 && (m * m) as f64 > rest {
            m -= 1;
        }
        let base = a + (n1 * n1) as f64;
        let mut row = 1.0 / base;
        for n2 in 1..=m {
            row += 2.0 / (base + (n2 * n2) as f64);
        }
        sum += row;
    }
    let residual = (sum - PI * (1.0 + rr / a).ln()).abs();
    let bound = (r / a.sqrt()).min(1.0) / a.sqrt();
    Ok(HrwResidual {
        a,
        r,
        residual,
        bound,
    })
}

/// Grid points at (approximately) dyadic radii 2^{−k} along the first axis,
/// for k = −1, 0, 1, … down to one grid cell. Returns (flat index, |x|).
pub fn dyadic_probes(grid: &TorusGrid) -> Vec<(usize, f64)> {
    let h = grid.spacing();
    let mut out: Vec<(usize, f64)> = Vec::new();
    let mut k = -1;
    loop {
        let r = 2f64.powi(-k);
        let j = (r / h).round() as i64;
        if j < 1 {
            break;
        }
        let idx = grid.shift_point(0, [j, 0]);
        if out.last().map(|(i, _)| *i) != Some(idx) {
            out.push((idx, grid.distance_from_origin(idx)));
        }
        if j == 1 {
            break;
        }
        k += 1;
    }
    out
}

/// min and max of P_N²G(x) + (1/2π) log(|x| + 1/N) over the dyadic probes.
pub fn green_log_offsets(big_n: usize, grid: &TorusGrid) -> Result<(f64, f64)> {
    let table = truncated_green(big_n, grid)?;
    let offsets: Vec<f64> = dyadic_probes(grid)
        .into_iter()
        .map(|(i, r)| table.values[i] + (r + 1.0 / big_n as f64).ln() / (2.0 * PI))
        .collect();
    Ok(min_max(&offsets))
}

/// min and max of Γ_N(t, x) + (t/4π) log(|x| + 1/N) over the dyadic probes.
pub fn gamma_log_offsets(t: f64, big_n: usize, grid: &TorusGrid) -> Result<(f64, f64)> {
    let table = covariance_gamma(t, big_n, grid)?;
    let offsets: Vec<f64> = dyadic_probes(grid)
        .into_iter()
        .map(|(i, r)| table.values[i] + t * (r + 1.0 / big_n as f64).ln() / (4.0 * PI))
        .collect();
    Ok(min_max(&offsets))
}

/// Largest ratio of |P_{N_j}²G − P_{N₁}P_{N₂}G| (j = 1, 2) to
/// min(max(1, −log(|x| + 1/N₂)), 1/(N₁|x|)) over the dyadic probes.
pub fn cross_truncation_constant(n1: usize, n2: usize, grid: &TorusGrid) -> Result<f64> {
    let cross = cross_green(n1, n2, grid)?;
    let g1 = truncated_green(n1, grid)?;
    let g2 = truncated_green(n2, grid)?;
    let mut worst: f64 = 0.0;
    for (i, r) in dyadic_probes(grid) {
        let shape = (1.0f64).max(-(r + 1.0 / n2 as f64).ln()).min(1.0 / (n1 as f64 * r));
        for g in [&g1, &g2] {
            worst = worst.max((g.values[i] - cross.values[i]).abs() / shape);
        }
    }
    Ok(worst)
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)))
}
