//! Exact-in-law sampling of the truncated stochastic convolution
//! Ψ_N(t) = ∫₀ᵗ S(t − t′) P_N dW(t′) and its time derivative.
//!
//! Each Fourier mode (a_n, b_n) = (Ψ̂_N(n), ∂ₜΨ̂_N(n)) is a linear SDE
//! da = b dt, db = −⟨n⟩²a dt + χ_N(n) dB_n, whose transition over a step h is
//! a rotation plus a centered Gaussian pair with closed-form covariance.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::noise::{classify, ModeClass, NoiseStream};
use crate::spectral::{bracket, chi, inverse_transform, SpectralField, TorusGrid};
use crate::{Error, Result};

/// z − sin z without cancellation for small z.
pub(crate) fn z_minus_sin(z: f64) -> f64 {
    if z.abs() < 0.05 {
        let z2 = z * z;
        z * z2 / 6.0 * (1.0 - z2 / 20.0 * (1.0 - z2 / 42.0 * (1.0 - z2 / 72.0)))
    } else {
        z - z.sin()
    }
}

/// ∫₀ᵗ sin²(w s)/w² ds = t/(2w²) − sin(2tw)/(4w³), the per-mode variance of
/// Ψ̂ started from zero, before the χ_N² factor.
pub fn psi_variance_factor(t: f64, w: f64) -> f64 {
    z_minus_sin(2.0 * t * w) / (4.0 * w * w * w)
}

/// Deterministic and stochastic parts of the one-step transition of a mode.
#[derive(Debug, Clone, Copy)]
struct Transition {
    cos: f64,
    sin_over_w: f64,
    w_sin: f64,
    // lower-triangular Cholesky factor of the unit-forcing covariance
    l11: f64,
    l21: f64,
    l22: f64,
    clamped: bool,
}

impl Transition {
    fn new(w: f64, h: f64) -> Self {
        let (s, c) = (h * w).sin_cos();
        let vaa = psi_variance_factor(h, w);
        let vbb = h / 2.0 + (2.0 * h * w).sin() / (4.0 * w);
        let vab = s * s / (2.0 * w * w);
        let l11 = vaa.max(0.0).sqrt();
        let (l21, l22, clamped) = if l11 > 0.0 {
            let l21 = vab / l11;
            let rest = vbb - l21 * l21;
            if rest < 0.0 {
                // perfectly correlated within rounding
                (vab.signum() * vbb.max(0.0).sqrt(), 0.0, true)
            } else {
                (l21, rest.sqrt(), false)
            }
        } else {
            (0.0, vbb.max(0.0).sqrt(), false)
        };
        Self {
            cos: c,
            sin_over_w: s / w,
            w_sin: w * s,
            l11,
            l21,
            l22,
            clamped,
        }
    }

    #[inline]
    fn apply(&self, a: f64, b: f64, chi: f64, z0: f64, z1: f64, scale: f64) -> (f64, f64) {
        let f = chi * scale;
        let na = self.cos * a + self.sin_over_w * b + f * self.l11 * z0;
        let nb = -self.w_sin * a + self.cos * b + f * (self.l21 * z0 + self.l22 * z1);
        (na, nb)
    }
}

#[derive(Debug, Clone, Copy)]
struct ModeEntry {
    idx: usize,
    mirror: Option<usize>,
    n: [i64; 2],
    w: f64,
    chi: f64,
}

fn support(grid: &TorusGrid, big_n: usize) -> Vec<ModeEntry> {
    (0..grid.len())
        .filter_map(|idx| {
            let n = grid.frequency(idx);
            let c = chi(n, big_n);
            if c == 0.0 {
                return None;
            }
            match classify(grid, idx) {
                ModeClass::Mirror => None,
                ModeClass::SelfConjugate => Some(ModeEntry {
                    idx,
                    mirror: None,
                    n,
                    w: bracket(n),
                    chi: c,
                }),
                ModeClass::Canonical => Some(ModeEntry {
                    idx,
                    mirror: Some(grid.neg_index(idx)),
                    n,
                    w: bracket(n),
                    chi: c,
                }),
            }
        })
        .collect()
}

/// Per-mode Gaussian state of (Ψ_N, ∂ₜΨ_N) at time `t`.
#[derive(Debug, Clone)]
pub struct ConvolutionState {
    grid: TorusGrid,
    big_n: usize,
    t: f64,
    steps: u64,
    stream: NoiseStream,
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    modes: Arc<Vec<ModeEntry>>,
    // transitions for the most recent step size
    cache: Option<(f64, Arc<Vec<Transition>>)>,
    clamped: u64,
}

impl ConvolutionState {
    /// Zero initial data at t = 0.
    pub fn new(grid: &TorusGrid, big_n: usize, stream: NoiseStream) -> Result<Self> {
        if big_n == 0 {
            return Err(Error::InvalidParameter("truncation N must be >= 1".into()));
        }
        grid.check_resolves(big_n)?;
        Ok(Self {
            grid: grid.clone(),
            big_n,
            t: 0.0,
            steps: 0,
            stream,
            a: vec![Complex64::default(); grid.len()],
            b: vec![Complex64::default(); grid.len()],
            modes: Arc::new(support(grid, big_n)),
            cache: None,
            clamped: 0,
        })
    }

    /// Fresh zero state at t = 0 on the same grid and truncation, driven by
    /// `stream`. Reuses the cached mode table.
    pub fn restarted(&self, stream: NoiseStream) -> Self {
        Self {
            grid: self.grid.clone(),
            big_n: self.big_n,
            t: 0.0,
            steps: 0,
            stream,
            a: vec![Complex64::default(); self.grid.len()],
            b: vec![Complex64::default(); self.grid.len()],
            modes: Arc::clone(&self.modes),
            cache: self.cache.clone(),
            clamped: 0,
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn truncation(&self) -> usize {
        self.big_n
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn stream(&self) -> NoiseStream {
        self.stream
    }

    /// Number of transitions taken so far; the next one draws from step key
    /// `steps()` of the stream.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Modes whose forcing correlation had to be clamped to ±1.
    pub fn clamped_modes(&self) -> u64 {
        self.clamped
    }

    /// Ψ̂_N(n) coefficients.
    pub fn psi_coeffs(&self) -> &[Complex64] {
        &self.a
    }

    /// ∂ₜΨ̂_N(n) coefficients.
    pub fn dpsi_coeffs(&self) -> &[Complex64] {
        &self.b
    }

    pub fn psi_spectral(&self) -> SpectralField {
        SpectralField::from_coeffs(&self.grid, self.a.clone(), true).expect("grid-sized")
    }

    pub fn dpsi_spectral(&self) -> SpectralField {
        SpectralField::from_coeffs(&self.grid, self.b.clone(), true).expect("grid-sized")
    }

    /// Exact transition to t + h.
    pub fn advance(&mut self, h: f64) -> Result<()> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "time step must be positive, got {h}"
            )));
        }
        let key = self.stream.step(self.steps);
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let transitions = match &self.cache {
            Some((ch, tr)) if *ch == h => Arc::clone(tr),
            _ => {
                let tr: Arc<Vec<Transition>> = Arc::new(self.modes.par_iter().map(|m| Transition::new(m.w, h)).collect());
                self.cache = Some((h, Arc::clone(&tr)));
                tr
            }
        };
        let (a, b) = (&self.a, &self.b);
        let updates: Vec<(Complex64, Complex64, bool)> = self
            .modes
            .par_iter()
            .zip(transitions.par_iter())
            .map(|(m, tr)| {
                let z = key.mode_normals(m.n);
                let (a0, b0) = (a[m.idx], b[m.idx]);
                if m.mirror.is_none() {
                    let (ar, br) = tr.apply(a0.re, b0.re, m.chi, z[0], z[1], 1.0);
                    (Complex64::new(ar, 0.0), Complex64::new(br, 0.0), tr.clamped)
                } else {
                    let (ar, br) = tr.apply(a0.re, b0.re, m.chi, z[0], z[1], inv_sqrt2);
                    let (ai, bi) = tr.apply(a0.im, b0.im, m.chi, z[2], z[3], inv_sqrt2);
                    (Complex64::new(ar, ai), Complex64::new(br, bi), tr.clamped)
                }
            })
            .collect();
        for (m, (na, nb, clamped)) in self.modes.iter().zip(updates) {
            self.a[m.idx] = na;
            self.b[m.idx] = nb;
            if let Some(j) = m.mirror {
                self.a[j] = na.conj();
                self.b[j] = nb.conj();
            }
            if clamped {
                self.clamped += 1;
            }
        }
        if self.clamped > 0 {
            log::debug!("{} mode transitions clamped to unit correlation", self.clamped);
        }
        self.t += h;
        self.steps += 1;
        Ok(())
    }

    /// Ψ_N(t, ·) on the grid.
    pub fn psi_field(&self) -> Vec<f64> {
        inverse_transform(&self.psi_spectral()).expect("Hermitian by construction")
    }

    /// ∂ₜΨ_N(t, ·) on the grid.
    pub fn dpsi_field(&self) -> Vec<f64> {
        inverse_transform(&self.dpsi_spectral()).expect("Hermitian by construction")
    }
}

/// Free-function form of [`ConvolutionState::advance`].
pub fn advance(state: &ConvolutionState, h: f64) -> Result<ConvolutionState> {
    let mut next = state.clone();
    next.advance(h)?;
    Ok(next)
}

/// Snapshots of Ψ_N along `times`, which must start at 0 and be strictly
/// increasing. The first snapshot is the zero initial state.
pub fn sample_path(
    grid: &TorusGrid,
    big_n: usize,
    times: &[f64],
    stream: NoiseStream,
) -> Result<Vec<ConvolutionState>> {
    match times.first() {
        Some(t0) if *t0 == 0.0 => {}
        _ => {
            return Err(Error::InvalidParameter(
                "time grid must start at 0".into(),
            ))
        }
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(
            "time grid must be strictly increasing".into(),
        ));
    }
    let mut state = ConvolutionState::new(grid, big_n, stream)?;
    let mut out = Vec::with_capacity(times.len());
    out.push(state.clone());
    for w in times.windows(2) {
        state.advance(w[1] - w[0])?;
        out.push(state.clone());
    }
    Ok(out)
}

/// Monte Carlo estimates of E[Ψ_N(t, x + d) Ψ_N(t, x)] for each displacement
/// d in `offsets` (grid cells). Each sample contributes its spatial average
/// over x; samples use streams `stream.with_sample(s)`, s = 0..samples.
pub fn mc_covariance(
    grid: &TorusGrid,
    big_n: usize,
    t: f64,
    offsets: &[[i64; 2]],
    samples: usize,
    stream: NoiseStream,
) -> Result<Vec<crate::stats::Estimate>> {
    if samples < 2 {
        return Err(Error::InvalidParameter("covariance estimate needs >= 2 samples".into()));
    }
    let template = ConvolutionState::new(grid, big_n, stream)?;
    let per: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut state = template.restarted(stream.with_sample(s as u64));
            if t > 0.0 {
                state.advance(t)?;
            }
            let psi = state.psi_field();
            Ok(offsets
                .iter()
                .map(|&d| {
                    let sum: f64 = (0..psi.len()).map(|i| psi[grid.shift_point(i, d)] * psi[i]).sum();
                    sum / psi.len() as f64
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..offsets.len())
        .map(|k| crate::stats::Estimate::from_samples(&per.iter().map(|row| row[k]).collect::<Vec<_>>()))
        .collect())
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"SGPSI\0\0\x01";

/// Writes a state as a little-endian binary snapshot:
///
/// ```text
/// magic   8 bytes  "SGPSI\0\0\x01"
/// M       u32      points per axis
/// N       u32      truncation
/// steps   u64      transitions taken
/// seed, experiment, sample   3 × u64
/// t       f64
/// a       M² × (re f64, im f64)   Ψ̂ in FFT order
/// b       M² × (re f64, im f64)   ∂ₜΨ̂ in FFT order
/// ```
pub fn write_snapshot(state: &ConvolutionState, mut out: impl Write) -> Result<()> {
    out.write_all(SNAPSHOT_MAGIC)?;
    out.write_all(&(state.grid.size() as u32).to_le_bytes())?;
    out.write_all(&(state.big_n as u32).to_le_bytes())?;
    out.write_all(&state.steps.to_le_bytes())?;
    for w in [state.stream.seed, state.stream.experiment, state.stream.sample] {
        out.write_all(&w.to_le_bytes())?;
    }
    out.write_all(&state.t.to_le_bytes())?;
    for c in state.a.iter().chain(&state.b) {
        out.write_all(&c.re.to_le_bytes())?;
        out.write_all(&c.im.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a snapshot written by [`write_snapshot`]; advancing the restored
/// state continues the original noise stream.
pub fn read_snapshot(mut input: impl Read) -> Result<ConvolutionState> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut u32b = [0u8; 4];
    let mut u64b = [0u8; 8];
    input.read_exact(&mut u32b)?;
    let m = u32::from_le_bytes(u32b) as usize;
    input.read_exact(&mut u32b)?;
    let big_n = u32::from_le_bytes(u32b) as usize;
    let mut words = [0u64; 4];
    for w in words.iter_mut() {
        input.read_exact(&mut u64b)?;
        *w = u64::from_le_bytes(u64b);
    }
    input.read_exact(&mut u64b)?;
    let t = f64::from_le_bytes(u64b);
    let grid = TorusGrid::new(m)?;
    let mut state = ConvolutionState::new(&grid, big_n, NoiseStream::new(words[1], words[2], words[3]))?;
    state.steps = words[0];
    state.t = t;
    let mut read_c = || -> Result<Complex64> {
        input.read_exact(&mut u64b)?;
        let re = f64::from_le_bytes(u64b);
        input.read_exact(&mut u64b)?;
        Ok(Complex64::new(re, f64::from_le_bytes(u64b)))
    };
    for i in 0..grid.len() {
        state.a[i] = read_c()?;
    }
    for i in 0..grid.len() {
        state.b[i] = read_c()?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Estimate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn covariance_estimate_small() {
        let g = TorusGrid::resolving(8);
        let offsets = [[0, 0], [1, 0], [3, 2]];
        let est = mc_covariance(&g, 8, 0.5, &offsets, 2000, NoiseStream::new(5, 1, 0)).unwrap();
        let exact = crate::covariance::covariance_gamma(0.5, 8, &g).unwrap();
        for (e, d) in est.iter().zip(offsets) {
            assert!(e.within(exact.at_offset(d), 4.0), "{d:?}: {e:?} vs {}", exact.at_offset(d));
        }
        assert!(mc_covariance(&g, 8, 0.5, &offsets, 1, NoiseStream::new(5, 1, 0)).is_err());
    }

    #[test]
    fn small_argument_series_matches() {
        for z in [1e-6, 1e-3, 0.01, 0.049] {
            let series = z_minus_sin(z);
            let direct = z - z.sin();
            assert!((series - direct).abs() <= 1e-9 * direct.abs().max(1e-300) + 1e-22);
        }
        // vaa ≈ h³/3 for small hw
        let v = psi_variance_factor(1e-3, 1.0);
        assert!((v / (1e-9 / 3.0) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn transition_covariance_reassembles() {
        for (w, h) in [(1.0, 0.1), (5.0, 0.3), (40.0, 0.01), (300.0, 2.0)] {
            let tr = Transition::new(w, h);
            let vaa = psi_variance_factor(h, w);
            let vbb = h / 2.0 + (2.0 * h * w).sin() / (4.0 * w);
            let vab = (h * w).sin().powi(2) / (2.0 * w * w);
            assert!((tr.l11 * tr.l11 - vaa).abs() < 1e-14 * vaa.max(1e-12));
            assert!((tr.l11 * tr.l21 - vab).abs() < 1e-12 * vab.abs().max(1e-12));
            assert!((tr.l21 * tr.l21 + tr.l22 * tr.l22 - vbb).abs() < 1e-12 * vbb);
        }
    }

    #[test]
    fn transition_matches_euler_maruyama() {
        // oracle: fine-step Euler–Maruyama on one real mode
        let (w, h) = (3.0_f64, 0.4);
        let fine = 2000;
        let dt = h / fine as f64;
        let paths = 4000;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (mut sa, mut sb, mut sab) = (0.0, 0.0, 0.0);
        for _ in 0..paths {
            let (mut a, mut b) = (0.0_f64, 0.0_f64);
            for _ in 0..fine {
                let dw: f64 = rng.sample::<f64, _>(StandardNormal) * dt.sqrt();
                // symplectic Euler keeps the oscillator stable
                b += -w * w * a * dt + dw;
                a += b * dt;
            }
            sa += a * a;
            sb += b * b;
            sab += a * b;
        }
        let n = paths as f64;
        let tr = Transition::new(w, h);
        let vaa = tr.l11 * tr.l11;
        let vbb = tr.l21 * tr.l21 + tr.l22 * tr.l22;
        let vab = tr.l11 * tr.l21;
        assert!((sa / n - vaa).abs() < 0.1 * vaa, "{} vs {vaa}", sa / n);
        assert!((sb / n - vbb).abs() < 0.1 * vbb, "{} vs {vbb}", sb / n);
        assert!((sab / n - vab).abs() < 0.1 * vaa.sqrt() * vbb.sqrt());
    }

    #[test]
    fn zero_initial_state() {
        let g = TorusGrid::new(16).unwrap();
        let s = ConvolutionState::new(&g, 4, NoiseStream::new(1, 0, 0)).unwrap();
        assert_eq!(s.time(), 0.0);
        assert!(s.psi_field().iter().all(|v| *v == 0.0));
        assert!(ConvolutionState::new(&g, 9, NoiseStream::new(1, 0, 0)).is_err());
    }

    #[test]
    fn rejects_bad_steps_and_grids() {
        let g = TorusGrid::new(8).unwrap();
        let mut s = ConvolutionState::new(&g, 3, NoiseStream::new(1, 0, 0)).unwrap();
        assert!(s.advance(0.0).is_err());
        assert!(sample_path(&g, 3, &[0.0, 0.5, 0.5], NoiseStream::new(1, 0, 0)).is_err());
        assert!(sample_path(&g, 3, &[0.1, 0.5], NoiseStream::new(1, 0, 0)).is_err());
        let only = sample_path(&g, 3, &[0.0], NoiseStream::new(1, 0, 0)).unwrap();
        assert_eq!(only.len(), 1);
        assert_eq!(only[0].time(), 0.0);
    }

    #[test]
    fn modes_outside_cutoff_stay_zero() {
        let g = TorusGrid::new(16).unwrap();
        let mut s = ConvolutionState::new(&g, 4, NoiseStream::new(3, 0, 0)).unwrap();
        for _ in 0..3 {
            s.advance(0.2).unwrap();
        }
        for i in 0..g.len() {
            let n = g.frequency(i);
            if n[0] * n[0] + n[1] * n[1] >= 16 {
                assert_eq!(s.psi_coeffs()[i], Complex64::default());
                assert_eq!(s.dpsi_coeffs()[i], Complex64::default());
            }
            assert_eq!(s.psi_coeffs()[g.neg_index(i)], s.psi_coeffs()[i].conj());
        }
    }

    #[test]
    fn single_step_equals_one_point_path() {
        let g = TorusGrid::new(8).unwrap();
        let stream = NoiseStream::new(4, 1, 2);
        let mut s = ConvolutionState::new(&g, 3, stream).unwrap();
        s.advance(0.7).unwrap();
        let path = sample_path(&g, 3, &[0.0, 0.7], stream).unwrap();
        assert_eq!(path[1].psi_coeffs(), s.psi_coeffs());
    }

    fn mode_variance(big_n: usize, n: [i64; 2], steps: &[f64], samples: u64) -> (Estimate, Estimate) {
        let g = TorusGrid::resolving(big_n);
        let stream = NoiseStream::new(31, 7, 0);
        let mut va = Vec::new();
        let mut energy = Vec::new();
        let w = bracket(n);
        for s in 0..samples {
            let mut st = ConvolutionState::new(&g, big_n, stream.with_sample(s)).unwrap();
            for h in steps {
                st.advance(*h).unwrap();
            }
            let idx = g.index_of(n).unwrap();
            va.push(st.psi_coeffs()[idx].norm_sqr());
            energy.push(w * w * st.psi_coeffs()[idx].norm_sqr() + st.dpsi_coeffs()[idx].norm_sqr());
        }
        (Estimate::from_samples(&va), Estimate::from_samples(&energy))
    }

    #[test]
    fn marginal_variance_and_energy_identity() {
        let t = 0.8;
        let big_n = 4;
        for n in [[0, 0], [1, 0], [2, 1]] {
            let c = chi(n, big_n);
            let expected = c * c * psi_variance_factor(t, bracket(n));
            let (one, e1) = mode_variance(big_n, n, &[t], 100_000);
            assert!(one.within(expected, 3.0), "{n:?}: {} ± {} vs {expected}", one.mean, one.se);
            assert!(e1.within(c * c * t, 3.0));
            let (two, _) = mode_variance(big_n, n, &[t / 2.0, t / 2.0], 100_000);
            assert!(two.within(expected, 3.0), "{n:?}: two-step {} ± {}", two.mean, two.se);
        }
    }

    #[test]
    fn snapshot_round_trip_and_replay() {
        let g = TorusGrid::new(12).unwrap();
        let mut s = ConvolutionState::new(&g, 5, NoiseStream::new(8, 2, 3)).unwrap();
        s.advance(0.3).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&s, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 4 + 4 + 8 * 4 + 8 + 2 * g.len() * 16);
        let mut r = read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(r.psi_coeffs(), s.psi_coeffs());
        assert_eq!(r.time(), s.time());
        s.advance(0.1).unwrap();
        r.advance(0.1).unwrap();
        assert_eq!(r.dpsi_coeffs(), s.dpsi_coeffs());
        assert!(read_snapshot(&b"garbage!"[..]).is_err());
    }
}
