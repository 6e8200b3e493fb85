//! Grids, transforms and Fourier multipliers on the 2-torus 𝕋² = [0, 2π)².
//!
//! Spectral coefficients are stored in FFT order: the row-major index
//! `k1 * M + k2` holds the frequency `n = (k1', k2')` where `k' = k` for
//! `k < M/2` and `k' = k − M` otherwise, so the representable lattice is
//! `[−M/2, M/2)²`. The transform is normalised so that coefficients are the
//! pairing ⟨f, e_n⟩ with e_n(x) = (2π)⁻¹e^{in·x}; a band-limited field is
//! recovered exactly as f = Σ_n f̂(n) e_n.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result};

/// ⟨n⟩ = (1 + |n|²)^{1/2}.
#[inline]
pub fn bracket(n: [i64; 2]) -> f64 {
    ((1 + n[0] * n[0] + n[1] * n[1]) as f64).sqrt()
}

/// Uniform M × M grid on the torus with cached FFT plans.
#[derive(Clone)]
pub struct TorusGrid {
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid").field("m", &self.m).finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m
    }
}

impl TorusGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m < 4 || m % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and >= 4, got {m}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            m,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        })
    }

    /// Smallest even 5-smooth grid with M ≥ 2N + 2, so that the cutoff χ_N
    /// including its transition band is fully representable.
    pub fn resolving(n: usize) -> Self {
        let mut m = (2 * n + 2).max(4);
        loop {
            if m % 2 == 0 && is_five_smooth(m) {
                break;
            }
            m += 1;
        }
        Self::new(m).expect("even size >= 4")
    }

    /// Points per axis.
    pub fn size(&self) -> usize {
        self.m
    }

    /// Total number of grid points (and of lattice frequencies).
    pub fn len(&self) -> usize {
        self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nyquist(&self) -> usize {
        self.m / 2
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.m as f64
    }

    /// Quadrature weight of one cell, (2π/M)².
    pub fn cell_area(&self) -> f64 {
        self.spacing() * self.spacing()
    }

    /// True when every frequency with |n| < N is representable.
    pub fn resolves(&self, n: usize) -> bool {
        self.nyquist() >= n
    }

    pub(crate) fn check_resolves(&self, n: usize) -> Result<()> {
        if self.resolves(n) {
            Ok(())
        } else {
            Err(Error::UnderResolved { m: self.m, n })
        }
    }

    /// Physical point x_j = 2π j / M for the flat index `idx`.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let h = self.spacing();
        [(idx / self.m) as f64 * h, (idx % self.m) as f64 * h]
    }

    #[inline]
    fn centered(&self, k: usize) -> i64 {
        if k < self.m / 2 {
            k as i64
        } else {
            k as i64 - self.m as i64
        }
    }

    /// Lattice frequency stored at flat index `idx`.
    #[inline]
    pub fn frequency(&self, idx: usize) -> [i64; 2] {
        [self.centered(idx / self.m), self.centered(idx % self.m)]
    }

    /// Flat index of frequency `n`, if it lies in `[−M/2, M/2)²`.
    pub fn index_of(&self, n: [i64; 2]) -> Option<usize> {
        let half = (self.m / 2) as i64;
        let wrap = |c: i64| -> Option<usize> {
            if (-half..half).contains(&c) {
                Some(c.rem_euclid(self.m as i64) as usize)
            } else {
                None
            }
        };
        Some(wrap(n[0])? * self.m + wrap(n[1])?)
    }

    /// Flat index of −n modulo the lattice period.
    #[inline]
    pub fn neg_index(&self, idx: usize) -> usize {
        let (k1, k2) = (idx / self.m, idx % self.m);
        ((self.m - k1) % self.m) * self.m + (self.m - k2) % self.m
    }

    /// Flat index of the grid point −x (used for parity checks).
    pub fn reflect_point(&self, idx: usize) -> usize {
        self.neg_index(idx)
    }

    /// Flat index of the grid point `idx` shifted by `shift` cells.
    pub fn shift_point(&self, idx: usize, shift: [i64; 2]) -> usize {
        let m = self.m as i64;
        let k1 = (((idx / self.m) as i64 + shift[0]).rem_euclid(m)) as usize;
        let k2 = (((idx % self.m) as i64 + shift[1]).rem_euclid(m)) as usize;
        k1 * self.m + k2
    }

    /// Torus distance of the grid point `idx` from the origin, measured in the
    /// fundamental domain [−π, π)².
    pub fn distance_from_origin(&self, idx: usize) -> f64 {
        let n = self.frequency(idx);
        let h = self.spacing();
        ((n[0] as f64 * h).powi(2) + (n[1] as f64 * h).powi(2)).sqrt()
    }

    fn fft2(&self, buf: &mut [Complex64], inverse: bool) {
        let m = self.m;
        let plan = if inverse { &self.inverse } else { &self.forward };
        let scratch_len = plan.get_inplace_scratch_len();
        let rows = |data: &mut [Complex64]| {
            // contiguous bands of rows per task; rustfft handles a multiple of m
            let band = m * m.div_ceil(rayon::current_num_threads().max(1) * 4).max(1);
            data.par_chunks_mut(band).for_each_init(
                || vec![Complex64::default(); scratch_len],
                |scratch, rows| plan.process_with_scratch(rows, scratch),
            );
        };
        rows(buf);
        transpose_in_place(buf, m);
        rows(buf);
        transpose_in_place(buf, m);
    }
}

fn is_five_smooth(mut m: usize) -> bool {
    for p in [2, 3, 5] {
        while m % p == 0 {
            m /= p;
        }
    }
    m == 1
}

/// Blocked in-place transpose of an m × m row-major matrix.
fn transpose_in_place(a: &mut [Complex64], m: usize) {
    const B: usize = 32;
    for bi in (0..m).step_by(B) {
        for bj in (bi..m).step_by(B) {
            for i in bi..(bi + B).min(m) {
                let start = if bi == bj { i + 1 } else { bj };
                for j in start..(bj + B).min(m) {
                    a.swap(i * m + j, j * m + i);
                }
            }
        }
    }
}

/// Complex Fourier coefficients ⟨f, e_n⟩ on the lattice of a [`TorusGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
    is_real: bool,
}

impl SpectralField {
    pub fn zeros(grid: &TorusGrid, is_real: bool) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![Complex64::default(); grid.len()],
            is_real,
        }
    }

    pub fn from_coeffs(grid: &TorusGrid, coeffs: Vec<Complex64>, is_real: bool) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs,
            is_real,
        })
    }

    /// Coefficient table defined by a function of the lattice frequency.
    pub fn from_symbol(grid: &TorusGrid, is_real: bool, symbol: impl Fn([i64; 2]) -> Complex64 + Sync) -> Self {
        let coeffs = (0..grid.len())
            .into_par_iter()
            .map(|idx| symbol(grid.frequency(idx)))
            .collect();
        Self {
            grid: grid.clone(),
            coeffs,
            is_real,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn is_real(&self) -> bool {
        self.is_real
    }

    /// Coefficient at frequency `n`, zero when not representable.
    pub fn coeff(&self, n: [i64; 2]) -> Complex64 {
        self.grid
            .index_of(n)
            .map(|i| self.coeffs[i])
            .unwrap_or_default()
    }

    /// Largest |f̂(−n) − conj f̂(n)| over the lattice, including the
    /// imaginary part of self-conjugate modes.
    pub fn hermitian_defect(&self) -> f64 {
        let m = self.grid.m;
        let mut worst: f64 = 0.0;
        for k1 in 0..m {
            let r1 = if k1 == 0 { 0 } else { m - k1 };
            let row = &self.coeffs[k1 * m..(k1 + 1) * m];
            let mirror = &self.coeffs[r1 * m..(r1 + 1) * m];
            for (k2, c) in row.iter().enumerate() {
                let r2 = if k2 == 0 { 0 } else { m - k2 };
                worst = worst.max((mirror[r2] - c.conj()).norm_sqr());
            }
        }
        worst.sqrt()
    }

    /// Pointwise multiplication by a real symbol m(n).
    pub fn apply_multiplier(&self, symbol: impl Fn([i64; 2]) -> f64 + Sync) -> Self {
        let grid = &self.grid;
        let coeffs = self
            .coeffs
            .par_iter()
            .enumerate()
            .map(|(i, c)| c * symbol(grid.frequency(i)))
            .collect();
        Self {
            grid: self.grid.clone(),
            coeffs,
            is_real: self.is_real,
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= factor);
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: f64, other: &SpectralField) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * factor;
        }
    }

    pub fn sub(&self, other: &SpectralField) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out.is_real = self.is_real && other.is_real;
        out
    }
}

/// Radial C^∞ cutoff with χ = 1 on |ξ| ≤ 1/2 and χ = 0 on |ξ| ≥ 1.
///
/// On the transition band 1/2 < r < 1 the profile is
/// g(2 − 2r) / (g(2 − 2r) + g(2r − 1)) with g(u) = exp(−1/u) for u > 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SmoothCutoff;

impl SmoothCutoff {
    pub fn eval(&self, xi: [f64; 2]) -> f64 {
        self.eval_radius(xi[0].hypot(xi[1]))
    }

    pub fn eval_radius(&self, r: f64) -> f64 {
        if r <= 0.5 {
            1.0
        } else if r >= 1.0 {
            0.0
        } else {
            let g = |u: f64| if u > 0.0 { (-1.0 / u).exp() } else { 0.0 };
            let a = g(2.0 - 2.0 * r);
            let b = g(2.0 * r - 1.0);
            a / (a + b)
        }
    }

    /// χ_N(n) = χ(n / N).
    #[inline]
    pub fn at(&self, n: [i64; 2], big_n: usize) -> f64 {
        let r = ((n[0] * n[0] + n[1] * n[1]) as f64).sqrt() / big_n as f64;
        self.eval_radius(r)
    }
}

/// Free-function form of [`SmoothCutoff::eval`].
pub fn smooth_cutoff_eval(xi: [f64; 2]) -> f64 {
    SmoothCutoff.eval(xi)
}

/// χ_N(n) with the crate's fixed cutoff profile.
#[inline]
pub fn chi(n: [i64; 2], big_n: usize) -> f64 {
    SmoothCutoff.at(n, big_n)
}

/// Forward transform of a real field sampled on the grid.
pub fn forward_transform(grid: &TorusGrid, values: &[f64]) -> Result<SpectralField> {
    check_len(grid, values.len())?;
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let buf = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut field = forward_raw(grid, buf);
    // exact Hermitian symmetry for real input
    symmetrize(&mut field);
    field.is_real = true;
    Ok(field)
}

/// Forward transform of a complex field; the result carries no reality flag.
pub fn forward_transform_complex(grid: &TorusGrid, values: &[Complex64]) -> Result<SpectralField> {
    check_len(grid, values.len())?;
    if let Some(index) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite { index });
    }
    Ok(forward_raw(grid, values.to_vec()))
}

fn forward_raw(grid: &TorusGrid, mut buf: Vec<Complex64>) -> SpectralField {
    grid.fft2(&mut buf, false);
    let norm = 2.0 * PI / grid.len() as f64;
    buf.iter_mut().for_each(|c| *c *= norm);
    SpectralField {
        grid: grid.clone(),
        coeffs: buf,
        is_real: false,
    }
}

fn symmetrize(field: &mut SpectralField) {
    let m = field.grid.m;
    let c = &mut field.coeffs;
    for i in 0..c.len() {
        let (k1, k2) = (i / m, i % m);
        let j = if k1 == 0 { 0 } else { m - k1 } * m + if k2 == 0 { 0 } else { m - k2 };
        if j == i {
            c[i] = Complex64::new(c[i].re, 0.0);
        } else if i < j {
            let avg = (c[i] + c[j].conj()) * 0.5;
            c[i] = avg;
            c[j] = avg.conj();
        }
    }
}

fn check_len(grid: &TorusGrid, len: usize) -> Result<()> {
    if len != grid.len() {
        return Err(Error::InvalidParameter(format!(
            "field has {len} values, grid expects {}",
            grid.len()
        )));
    }
    Ok(())
}

const HERMITIAN_TOL: f64 = 1e-10;

/// Inverse transform of a real (Hermitian-flagged) field.
///
/// Rejects coefficients whose Hermitian defect exceeds 10⁻¹⁰ of their scale.
/// Fields without the reality flag are synthesised and their real part
/// returned; use [`inverse_transform_complex`] to keep the imaginary part.
pub fn inverse_transform(field: &SpectralField) -> Result<Vec<f64>> {
    if let Some(index) = field
        .coeffs
        .iter()
        .position(|v| !(v.re.is_finite() && v.im.is_finite()))
    {
        return Err(Error::NonFinite { index });
    }
    if field.is_real {
        let scale = field.coeffs.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max).sqrt();
        let defect = field.hermitian_defect();
        if defect > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) && defect > 0.0 {
            return Err(Error::NotHermitian { defect });
        }
    }
    Ok(inverse_raw(field).into_iter().map(|c| c.re).collect())
}

/// Inverse transform keeping the complex values.
pub fn inverse_transform_complex(field: &SpectralField) -> Result<Vec<Complex64>> {
    if let Some(index) = field
        .coeffs
        .iter()
        .position(|v| !(v.re.is_finite() && v.im.is_finite()))
    {
        return Err(Error::NonFinite { index });
    }
    Ok(inverse_raw(field))
}

fn inverse_raw(field: &SpectralField) -> Vec<Complex64> {
    let mut buf = field.coeffs.clone();
    field.grid.fft2(&mut buf, true);
    let norm = 1.0 / (2.0 * PI);
    buf.iter_mut().for_each(|c| *c *= norm);
    buf
}

/// Smooth frequency projector P_N: multiplier χ(n / N).
pub fn project(field: &SpectralField, big_n: usize) -> Result<SpectralField> {
    if big_n == 0 {
        return Err(Error::InvalidParameter("projector needs N >= 1".into()));
    }
    if !field.grid.resolves(big_n) {
        log::warn!(
            "projector P_{big_n} truncated by grid of size {}",
            field.grid.size()
        );
    }
    Ok(field.apply_multiplier(|n| chi(n, big_n)))
}

/// Bessel potential ⟨∇⟩^s: multiplier ⟨n⟩^s.
pub fn apply_bessel(field: &SpectralField, s: f64) -> SpectralField {
    if s == 0.0 {
        return field.clone();
    }
    field.apply_multiplier(|n| bracket(n).powf(s))
}

/// ‖f‖_{H^s} = (Σ_n ⟨n⟩^{2s} |f̂(n)|²)^{1/2}.
pub fn sobolev_norm(field: &SpectralField, s: f64) -> f64 {
    let grid = &field.grid;
    let coeffs = &field.coeffs;
    ordered_sum(coeffs.len(), |i| {
        let w = if s == 0.0 {
            1.0
        } else {
            let n = grid.frequency(i);
            ((1 + n[0] * n[0] + n[1] * n[1]) as f64).powf(s)
        };
        w * coeffs[i].norm_sqr()
    })
    .sqrt()
}

/// Tabulated weights ⟨n⟩^{2s} for repeated H^s norms on one grid. Results
/// agree bitwise with [`sobolev_norm`].
#[derive(Debug, Clone)]
pub struct SobolevWeights {
    grid: TorusGrid,
    s: f64,
    weights: Vec<f64>,
}

impl SobolevWeights {
    pub fn new(grid: &TorusGrid, s: f64) -> Self {
        let weights = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                if s == 0.0 {
                    1.0
                } else {
                    let n = grid.frequency(i);
                    ((1 + n[0] * n[0] + n[1] * n[1]) as f64).powf(s)
                }
            })
            .collect();
        Self {
            grid: grid.clone(),
            s,
            weights,
        }
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// Panics if `field` lives on another grid.
    pub fn norm(&self, field: &SpectralField) -> f64 {
        assert_eq!(field.grid, self.grid, "grid mismatch");
        let c = &field.coeffs;
        ordered_sum(c.len(), |i| self.weights[i] * c[i].norm_sqr()).sqrt()
    }

    /// ‖a − b‖_{H^s} without forming the difference.
    pub fn distance(&self, a: &SpectralField, b: &SpectralField) -> f64 {
        assert!(a.grid == self.grid && b.grid == self.grid, "grid mismatch");
        let (x, y) = (&a.coeffs, &b.coeffs);
        ordered_sum(x.len(), |i| self.weights[i] * (x[i] - y[i]).norm_sqr()).sqrt()
    }
}

/// Σ_{i < len} f(i) with a fixed chunking, so the rounding does not depend
/// on the number of worker threads.
pub(crate) fn ordered_sum(len: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    const CHUNK: usize = 4096;
    let partial: Vec<f64> = (0..len.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = 0.0;
            for i in c * CHUNK..((c + 1) * CHUNK).min(len) {
                acc += f(i);
            }
            acc
        })
        .collect();
    partial.iter().sum()
}

/// Grid maximum of |⟨∇⟩^{−α} f|, the computable proxy for ‖f‖_{W^{−α,∞}}.
pub fn wneg_alpha_infty_norm(field: &SpectralField, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "W^(-α,∞) norm needs α >= 0, got {alpha}"
        )));
    }
    let smoothed = apply_bessel(field, -alpha);
    Ok(inverse_raw(&smoothed)
        .iter()
        .map(|c| if field.is_real { c.re.abs() } else { c.norm() })
        .fold(0.0, f64::max))
}

/// Grid quadrature ∫_{𝕋²} f.
pub fn quadrature(grid: &TorusGrid, values: &[f64]) -> f64 {
    grid.cell_area() * values.iter().sum::<f64>()
}

/// ‖f‖_{L^r} by grid quadrature.
pub fn lp_norm(grid: &TorusGrid, values: &[f64], r: f64) -> f64 {
    if r.is_infinite() {
        return values.iter().fold(0.0, |a, v| a.max(v.abs()));
    }
    (grid.cell_area() * values.iter().map(|v| v.abs().powf(r)).sum::<f64>()).powf(1.0 / r)
}


#[cfg(test)]
mod props {
    use proptest::prelude::*;

    use super::*;

    fn grid_and_values() -> impl Strategy<Value = (TorusGrid, Vec<f64>)> {
        prop::sample::select(vec![4usize, 8, 16, 32])
            .prop_flat_map(|m| (Just(m), prop::collection::vec(-10.0f64..10.0, m * m)))
            .prop_map(|(m, v)| (TorusGrid::new(m).unwrap(), v))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn transform_round_trip((g, v) in grid_and_values()) {
            let back = inverse_transform(&forward_transform(&g, &v).unwrap()).unwrap();
            let err = v.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(err <= 1e-11);
        }

        #[test]
        fn real_fields_are_hermitian((g, v) in grid_and_values()) {
            let f = forward_transform(&g, &v).unwrap();
            let scale = f.coeffs().iter().map(|c| c.norm()).fold(1.0, f64::max);
            prop_assert!(f.hermitian_defect() <= 1e-13 * scale);
        }

        #[test]
        fn parseval((g, v) in grid_and_values()) {
            let f = forward_transform(&g, &v).unwrap();
            let l2_sq = quadrature(&g, &v.iter().map(|x| x * x).collect::<Vec<_>>());
            let h0 = sobolev_norm(&f, 0.0);
            prop_assert!((h0 * h0 - l2_sq).abs() <= 1e-10 * l2_sq.max(1.0));
        }

        #[test]
        fn multipliers_commute((g, v) in grid_and_values(), s in -2.0f64..2.0, n in 1usize..40) {
            let f = forward_transform(&g, &v).unwrap();
            let a = apply_bessel(&project(&f, n).unwrap(), s);
            let b = project(&apply_bessel(&f, s), n).unwrap();
            for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
                prop_assert!((x - y).norm() <= 1e-15 * x.norm().max(y.norm()));
            }
        }

        #[test]
        fn bessel_shifts_sobolev_index((g, v) in grid_and_values(), s in -1.5f64..1.5, r in -1.5f64..1.5) {
            let f = forward_transform(&g, &v).unwrap();
            let lhs = sobolev_norm(&apply_bessel(&f, r), s);
            let rhs = sobolev_norm(&f, s + r);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        }

        #[test]
        fn cutoff_is_radial_and_bounded(n1 in -300i64..300, n2 in -300i64..300, big_n in 1usize..200) {
            let c = chi([n1, n2], big_n);
            prop_assert!((0.0..=1.0).contains(&c));
            prop_assert_eq!(c, chi([n2, -n1], big_n));
            prop_assert_eq!(c, chi([-n1, -n2], big_n));
            let r = ((n1 * n1 + n2 * n2) as f64).sqrt();
            if r <= big_n as f64 / 2.0 {
                prop_assert_eq!(c, 1.0);
            }
            if r >= big_n as f64 {
                prop_assert_eq!(c, 0.0);
            }
        }
    }
}
