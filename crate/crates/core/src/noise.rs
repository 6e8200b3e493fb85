//! Gaussian noise on the frequency lattice.
//!
//! # Stream derivation rule (version 1)
//!
//! Every Gaussian draw is a pure function of
//! `(seed, experiment, sample, step, n)`:
//!
//! - the 256-bit ChaCha8 key is the little-endian concatenation of the four
//!   `u64` words `seed ‖ experiment ‖ sample ‖ step`;
//! - the ChaCha stream number is `(n₁ as u32) << 32 | (n₂ as u32)` for the
//!   canonical representative `n` of the pair {n, −n};
//! - the first four standard normals (rand_distr's ziggurat `StandardNormal`)
//!   of that stream are the mode's draws.
//!
//! The rule depends neither on the truncation N nor on the grid size, so runs
//! at different N driven by the same stream see the same Brownian motions
//! B_n, which is what the coupled-realization experiments rely on.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::spectral::{inverse_transform, SpectralField, TorusGrid};
use crate::{Error, Result};

/// Version tag of the stream derivation rule, recorded in run manifests.
pub const STREAM_RULE_VERSION: u32 = 1;

/// Keyed, value-like handle on a family of independent Gaussian streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoiseStream {
    pub seed: u64,
    pub experiment: u64,
    pub sample: u64,
}

impl NoiseStream {
    pub fn new(seed: u64, experiment: u64, sample: u64) -> Self {
        Self {
            seed,
            experiment,
            sample,
        }
    }

    /// Stream of the `sample`-th ensemble member.
    pub fn with_sample(self, sample: u64) -> Self {
        Self { sample, ..self }
    }

    /// Generator keyed for time step `step`; per-mode draws come from
    /// [`StepKey::mode_normals`].
    pub fn step(&self, step: u64) -> StepKey {
        let mut key = [0u8; 32];
        for (chunk, word) in key
            .chunks_exact_mut(8)
            .zip([self.seed, self.experiment, self.sample, step])
        {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        StepKey {
            base: ChaCha8Rng::from_seed(key),
        }
    }
}

/// ChaCha key for one (seed, experiment, sample, step) tuple.
#[derive(Debug, Clone)]
pub struct StepKey {
    base: ChaCha8Rng,
}

impl StepKey {
    /// Four independent standard normals attached to lattice mode `n`.
    pub fn mode_normals(&self, n: [i64; 2]) -> [f64; 4] {
        let mut rng = self.base.clone();
        rng.set_stream(mode_code(n));
        rng.set_word_pos(0);
        [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ]
    }
}

fn mode_code(n: [i64; 2]) -> u64 {
    ((n[0] as i32 as u32 as u64) << 32) | (n[1] as i32 as u32 as u64)
}

/// How a flat lattice index relates to its conjugate partner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeClass {
    /// n ≡ −n on the finite lattice: a real-valued mode.
    SelfConjugate,
    /// Canonical representative of the pair {n, −n}.
    Canonical,
    /// Mirror of the canonical representative at `neg_index`.
    Mirror,
}

/// Classifies a lattice index. Pairs whose members both lie strictly inside
/// the lattice are ordered by the integer frequency (n₁ > 0, or n₁ = 0 and
/// n₂ > 0 is canonical), independently of the grid size; pairs touching the
/// Nyquist line fall back to index order.
pub fn classify(grid: &TorusGrid, idx: usize) -> ModeClass {
    let j = grid.neg_index(idx);
    if j == idx {
        return ModeClass::SelfConjugate;
    }
    let n = grid.frequency(idx);
    let half = grid.nyquist() as i64;
    let canonical = if n[0] == -half || n[1] == -half {
        idx < j
    } else {
        n[0] > 0 || (n[0] == 0 && n[1] > 0)
    };
    if canonical {
        ModeClass::Canonical
    } else {
        ModeClass::Mirror
    }
}

/// Increments ΔB_n of the cylindrical Wiener process over one step.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerIncrement {
    pub h: f64,
    pub values: SpectralField,
}

/// Samples ΔB_n with E|ΔB_n|² = h, ΔB_{−n} = conj(ΔB_n) and ΔB real on
/// self-conjugate modes. Draws for mode n come from the first two normals
/// of its keyed stream.
pub fn sample_increment(grid: &TorusGrid, h: f64, key: &StepKey) -> Result<WienerIncrement> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "time step must be positive, got {h}"
        )));
    }
    let half_var = (h / 2.0).sqrt();
    let full = h.sqrt();
    let coeffs: Vec<Complex64> = (0..grid.len())
        .into_par_iter()
        .map(|idx| match classify(grid, idx) {
            ModeClass::SelfConjugate => {
                let z = key.mode_normals(grid.frequency(idx));
                Complex64::new(full * z[0], 0.0)
            }
            ModeClass::Canonical => {
                let z = key.mode_normals(grid.frequency(idx));
                Complex64::new(half_var * z[0], half_var * z[1])
            }
            ModeClass::Mirror => {
                let partner = grid.neg_index(idx);
                let z = key.mode_normals(grid.frequency(partner));
                Complex64::new(half_var * z[0], -half_var * z[1])
            }
        })
        .collect();
    Ok(WienerIncrement {
        h,
        values: SpectralField::from_coeffs(grid, coeffs, true)?,
    })
}

/// Physical-space view Σ_n ΔB_n e_n / h of an increment.
pub fn white_noise_field(increment: &WienerIncrement) -> Result<Vec<f64>> {
    let mut field = inverse_transform(&increment.values)?;
    field.iter_mut().for_each(|v| *v /= increment.h);
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::inverse_transform_complex;
    use crate::stats::Estimate;

    #[test]
    fn rejects_non_positive_step() {
        let g = TorusGrid::new(8).unwrap();
        let key = NoiseStream::new(1, 0, 0).step(0);
        assert!(sample_increment(&g, 0.0, &key).is_err());
        assert!(sample_increment(&g, -1.0, &key).is_err());
    }

    #[test]
    fn hermitian_structure_is_exact() {
        let g = TorusGrid::new(10).unwrap();
        let inc = sample_increment(&g, 0.3, &NoiseStream::new(9, 1, 2).step(5)).unwrap();
        let c = inc.values.coeffs();
        for i in 0..g.len() {
            assert_eq!(c[g.neg_index(i)], c[i].conj());
        }
        assert_eq!(inc.values.coeff([0, 0]).im, 0.0);
    }

    #[test]
    fn deterministic_per_key() {
        let g = TorusGrid::new(12).unwrap();
        let s = NoiseStream::new(42, 3, 7);
        let a = sample_increment(&g, 0.1, &s.step(4)).unwrap();
        let b = sample_increment(&g, 0.1, &s.step(4)).unwrap();
        assert_eq!(a, b);
        let c = sample_increment(&g, 0.1, &s.step(5)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn draws_independent_of_grid_size() {
        let small = TorusGrid::new(8).unwrap();
        let large = TorusGrid::new(20).unwrap();
        let key = NoiseStream::new(1, 2, 3).step(0);
        let a = sample_increment(&small, 1.0, &key).unwrap();
        let b = sample_increment(&large, 1.0, &key).unwrap();
        for n in [[0, 0], [1, 2], [-3, 1], [0, -2]] {
            assert_eq!(a.values.coeff(n), b.values.coeff(n));
        }
    }

    #[test]
    fn variance_normalisation() {
        let g = TorusGrid::new(6).unwrap();
        let h = 0.25;
        let stream = NoiseStream::new(2024, 11, 0);
        let draws = 100_000;
        let probes = [[0, 0], [1, 0], [2, -1], [-3, 0], [-3, -3]];
        let mut acc = vec![Vec::with_capacity(draws); probes.len()];
        for s in 0..draws {
            let key = stream.with_sample(s as u64).step(0);
            let inc = sample_increment(&g, h, &key).unwrap();
            for (k, n) in probes.iter().enumerate() {
                acc[k].push(inc.values.coeff(*n).norm_sqr() / h);
            }
        }
        for (k, n) in probes.iter().enumerate() {
            let e = Estimate::from_samples(&acc[k]);
            assert!(
                (0.98..=1.02).contains(&e.mean),
                "mode {n:?}: E|ΔB|²/h = {}",
                e.mean
            );
        }
    }

    #[test]
    fn white_noise_is_real_and_decorrelated() {
        let g = TorusGrid::new(8).unwrap();
        let stream = NoiseStream::new(5, 0, 0);
        let zero = WienerIncrement {
            h: 1.0,
            values: SpectralField::zeros(&g, true),
        };
        assert!(white_noise_field(&zero).unwrap().iter().all(|v| *v == 0.0));

        let inc = sample_increment(&g, 0.5, &stream.step(0)).unwrap();
        let c = inverse_transform_complex(&inc.values).unwrap();
        let scale = c.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
        assert!(c.iter().all(|v| v.im.abs() < 1e-12 * scale));

        let (a, b) = (0usize, g.shift_point(0, [3, 2]));
        let products: Vec<f64> = (0..20_000)
            .map(|s| {
                let inc = sample_increment(&g, 1.0, &stream.with_sample(s).step(0)).unwrap();
                let w = white_noise_field(&inc).unwrap();
                w[a] * w[b]
            })
            .collect();
        let e = Estimate::from_samples(&products);
        assert!(e.within(0.0, 3.0), "cov = {} ± {}", e.mean, e.se);
    }

    #[test]
    fn disjoint_steps_uncorrelated() {
        let g = TorusGrid::new(4).unwrap();
        let stream = NoiseStream::new(77, 0, 0);
        let products: Vec<f64> = (0..10_000)
            .map(|s| {
                let st = stream.with_sample(s);
                let a = sample_increment(&g, 1.0, &st.step(0)).unwrap();
                let b = sample_increment(&g, 1.0, &st.step(1)).unwrap();
                a.values.coeff([1, 0]).re * b.values.coeff([1, 0]).re
            })
            .collect();
        let e = Estimate::from_samples(&products);
        assert!(e.within(0.0, 3.0));
    }

    #[test]
    fn isotropy_chi_square() {
        // equal variance across modes: Σ|ΔB_n|²/(h/2) is χ²(2·draws) per
        // complex mode; compare mode totals with a χ² homogeneity statistic.
        let g = TorusGrid::new(6).unwrap();
        let stream = NoiseStream::new(8, 0, 0);
        let modes = [[1, 0], [0, 1], [1, 1], [2, -1], [-2, 2], [1, -2]];
        let draws = 10_000;
        let mut totals = vec![0.0; modes.len()];
        for s in 0..draws {
            let inc = sample_increment(&g, 1.0, &stream.with_sample(s).step(0)).unwrap();
            for (k, n) in modes.iter().enumerate() {
                totals[k] += inc.values.coeff(*n).norm_sqr() / 0.5;
            }
        }
        // each total ~ χ²_{2·draws}: mean 2·draws, variance 4·draws
        let dof = 2.0 * draws as f64;
        let stat: f64 = totals.iter().map(|t| (t - dof).powi(2) / (2.0 * dof)).sum();
        // 99th percentile of χ²₆ is 16.81
        assert!(stat < 16.81, "chi-square statistic {stat}");
    }
}
