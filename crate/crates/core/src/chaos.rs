//! Moment structure of the imaginary multiplicative chaos Θ_N.
//!
//! Two families of checks live here. The charge-cancellation bound compares
//! the 2p-point interaction product of alternating charges with the best
//! single pairing of opposite charges. The moment oracles evaluate
//! E‖⟨∇⟩^{−α}Θ_N(t)‖²_{L²} exactly from the two-point function
//! E[Θ_N(t, x) conj Θ_N(t, y)] = exp(β²Γ_N(t, x − y)), and Monte Carlo
//! estimators sample the same quantities from exact Ψ_N draws.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::covariance::{covariance_gamma, cross_gamma};
use crate::noise::NoiseStream;
use crate::renorm::theta_with_sigma;
use crate::spectral::{
    ordered_sum, apply_bessel, bracket, forward_transform_complex, inverse_transform_complex, sobolev_norm, SpectralField,
    TorusGrid,
};
use crate::stats::{linear_fit, Estimate, LinearFit};
use crate::stoch_conv::ConvolutionState;
use crate::{Error, Result};

/// Largest p accepted by [`dipole_bound`] (p! pairings are enumerated).
pub const MAX_DIPOLE_P: usize = 8;

/// Largest β²σ_N(t) accepted by the exact moment oracles: the kernel spike
/// e^{β²σ_N} may exceed its bulk by at most e^{18.42} ≈ 10⁸.
pub const DYNAMIC_RANGE_BUDGET: f64 = 18.420_680_743_952_367;

/// Flat torus distance on the fundamental domain [−π, π)².
pub fn torus_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let wrap = |d: f64| {
        let r = (d + PI).rem_euclid(2.0 * PI) - PI;
        r.abs()
    };
    wrap(a[0] - b[0]).hypot(wrap(a[1] - b[1]))
}

/// 2p points y₁, …, y_{2p} with charges ε_j = +1 for even j and −1 for odd j
/// (1-based), i.e. alternating −, +, −, + in storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargedPointSet {
    points: Vec<[f64; 2]>,
}

impl ChargedPointSet {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "charged point set needs an even number of points, got {}",
                points.len()
            )));
        }
        Ok(Self { points })
    }

    /// `2p` points uniform on [0, 2π)².
    pub fn random(p: usize, rng: &mut impl Rng) -> Self {
        let points = (0..2 * p)
            .map(|_| [rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI)])
            .collect();
        Self { points }
    }

    pub fn p(&self) -> usize {
        self.points.len() / 2
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    /// Charge of the point stored at 0-based `index`.
    pub fn charge(&self, index: usize) -> i32 {
        if (index + 1) % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// Positive charges y₂, y₄, … in order.
    fn positives(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.points.iter().skip(1).step_by(2).copied()
    }

    fn negatives(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.points.iter().step_by(2).copied()
    }
}

#[inline]
fn regularised_ln(d: f64, big_n: f64) -> f64 {
    (d + 1.0 / big_n).ln()
}

/// ln Π_{j<k} (|y_j − y_k| + 1/N)^{ε_jε_kλ}. `big_n` may be `f64::INFINITY`;
/// merged opposite charges then give +∞.
pub fn interaction_product(set: &ChargedPointSet, lambda: f64, big_n: f64) -> f64 {
    let pts = set.points();
    let mut acc = 0.0;
    for j in 0..pts.len() {
        for k in j + 1..pts.len() {
            let sign = (set.charge(j) * set.charge(k)) as f64;
            acc += sign * lambda * regularised_ln(torus_distance(pts[j], pts[k]), big_n);
        }
    }
    if acc.is_nan() {
        // +∞ − ∞ from several merged pairs: opposite-charge merges dominate
        return f64::INFINITY;
    }
    acc
}

/// Result of [`dipole_bound`]: the log value and the maximising pairing
/// τ (0-based: positive charge j is paired with negative charge τ[j]).
#[derive(Debug, Clone, PartialEq)]
pub struct DipoleBound {
    pub ln_value: f64,
    pub pairing: Vec<usize>,
}

/// ln max_{τ ∈ S_p} Π_j (|y_{2j} − y_{2τ(j)−1}| + 1/N)^{−λ}, by brute force.
pub fn dipole_bound(set: &ChargedPointSet, lambda: f64, big_n: f64) -> Result<DipoleBound> {
    let p = set.p();
    if p > MAX_DIPOLE_P {
        return Err(Error::InvalidParameter(format!(
            "dipole bound enumerates p! pairings; p = {p} exceeds {MAX_DIPOLE_P}"
        )));
    }
    if p == 0 {
        return Ok(DipoleBound {
            ln_value: 0.0,
            pairing: Vec::new(),
        });
    }
    let pos: Vec<[f64; 2]> = set.positives().collect();
    let neg: Vec<[f64; 2]> = set.negatives().collect();
    let logs: Vec<Vec<f64>> = pos
        .iter()
        .map(|a| neg.iter().map(|b| regularised_ln(torus_distance(*a, *b), big_n)).collect())
        .collect();
    let mut perm: Vec<usize> = (0..p).collect();
    let mut best = (f64::NEG_INFINITY, perm.clone());
    for_each_permutation(&mut perm, 0, &mut |tau| {
        let v: f64 = -lambda * tau.iter().enumerate().map(|(j, &k)| logs[j][k]).sum::<f64>();
        if v > best.0 {
            best = (v, tau.to_vec());
        }
    });
    Ok(DipoleBound {
        ln_value: best.0,
        pairing: best.1,
    })
}

fn for_each_permutation(perm: &mut [usize], start: usize, f: &mut impl FnMut(&[usize])) {
    if start == perm.len() {
        f(perm);
        return;
    }
    for i in start..perm.len() {
        perm.swap(start, i);
        for_each_permutation(perm, start + 1, f);
        perm.swap(start, i);
    }
}

/// One row of [`cancellation_ratio_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub p: usize,
    pub lambda: f64,
    pub big_n: f64,
    pub trials: usize,
    pub max_ratio: f64,
}

/// Maximum over `trials` uniform point sets of
/// interaction_product / dipole_bound for every (λ, N). The same point sets
/// (drawn from `seed`) are reused across λ and N.
pub fn cancellation_ratio_scan(
    p: usize,
    lambdas: &[f64],
    ns: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<ScanRow>> {
    if trials == 0 {
        return Err(Error::InvalidParameter("scan needs at least one trial".into()));
    }
    if p > MAX_DIPOLE_P {
        return Err(Error::InvalidParameter(format!("p = {p} exceeds {MAX_DIPOLE_P}")));
    }
    let sets: Vec<ChargedPointSet> = (0..trials)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            ChargedPointSet::random(p, &mut rng)
        })
        .collect();
    let mut rows = Vec::new();
    for &lambda in lambdas {
        for &big_n in ns {
            let ratios: Vec<f64> = sets
                .par_iter()
                .map(|s| {
                    let bound = dipole_bound(s, lambda, big_n).expect("p checked");
                    interaction_product(s, lambda, big_n) - bound.ln_value
                })
                .collect();
            let max_ln = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            rows.push(ScanRow {
                p,
                lambda,
                big_n,
                trials,
                max_ratio: max_ln.exp(),
            });
        }
    }
    Ok(rows)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha >= 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("α must be >= 0, got {alpha}")))
    }
}

fn check_budget(exponent: f64) -> Result<()> {
    if exponent > DYNAMIC_RANGE_BUDGET {
        Err(Error::DynamicRange {
            exponent,
            budget: DYNAMIC_RANGE_BUDGET,
        })
    } else {
        Ok(())
    }
}

/// 2π Σ_n ⟨n⟩^{−2α} K̂(n) for a real even kernel K on the grid, which equals
/// E‖⟨∇⟩^{−α}F‖²_{L²} when K(x − y) = E[F(x) conj F(y)] (discrete identity,
/// exact on the grid).
fn weighted_kernel_mass(grid: &TorusGrid, kernel: &[f64], alpha: f64) -> Result<f64> {
    let values: Vec<Complex64> = kernel.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let hat = forward_transform_complex(grid, &values)?;
    let c = hat.coeffs();
    let weighted = ordered_sum(c.len(), |i| bracket(grid.frequency(i)).powf(-2.0 * alpha) * c[i].re);
    Ok(2.0 * PI * weighted)
}

/// E‖⟨∇⟩^{−α}Θ_N(t)‖²_{L²} on the grid, from exp(β²Γ_N(t, ·)).
pub fn second_moment_exact(t: f64, alpha: f64, beta: f64, big_n: usize, grid: &TorusGrid) -> Result<f64> {
    check_alpha(alpha)?;
    let gamma = covariance_gamma(t, big_n, grid)?;
    let sigma = gamma.at_origin();
    let b2 = beta * beta;
    check_budget(b2 * sigma)?;
    let shifted: Vec<f64> = gamma.values.iter().map(|g| (b2 * (g - sigma)).exp()).collect();
    Ok((b2 * sigma).exp() * weighted_kernel_mass(grid, &shifted, alpha)?)
}

/// E‖⟨∇⟩^{−α}(Θ_{N₁}(t) − Θ_{N₂}(t))‖²_{L²} from
/// e^{β²Γ_{N₁}} + e^{β²Γ_{N₂}} − 2e^{β²P_{N₁}P_{N₂}Γ}; needs N₂ ≥ N₁.
pub fn second_moment_diff_exact(
    t: f64,
    alpha: f64,
    beta: f64,
    n1: usize,
    n2: usize,
    grid: &TorusGrid,
) -> Result<f64> {
    check_alpha(alpha)?;
    if n2 < n1 {
        return Err(Error::InvalidParameter(format!(
            "difference moment needs N2 >= N1, got {n1} > {n2}"
        )));
    }
    let g1 = covariance_gamma(t, n1, grid)?;
    let g2 = covariance_gamma(t, n2, grid)?;
    let c12 = cross_gamma(t, n1, n2, grid)?;
    let b2 = beta * beta;
    let top = g2.at_origin().max(g1.at_origin());
    check_budget(b2 * top)?;
    if n1 == n2 {
        return Ok(0.0);
    }
    let kernel: Vec<f64> = (0..grid.len())
        .map(|i| {
            (b2 * (g1.values[i] - top)).exp() + (b2 * (g2.values[i] - top)).exp()
                - 2.0 * (b2 * (c12.values[i] - top)).exp()
        })
        .collect();
    Ok((b2 * top).exp() * weighted_kernel_mass(grid, &kernel, alpha)?)
}

/// Per-sample norms of ⟨∇⟩^{−α}Θ_N(t) for a list of times and exponents.
#[derive(Debug, Clone)]
pub struct ChaosSampleTable {
    pub times: Vec<f64>,
    pub alphas: Vec<f64>,
    /// `l2_sq[s][ti][ai]` = ‖⟨∇⟩^{−α}Θ‖²_{L²} of sample s.
    pub l2_sq: Vec<Vec<Vec<f64>>>,
    /// `winf[s][ti][ai]` = grid max |⟨∇⟩^{−α}Θ|.
    pub winf: Vec<Vec<Vec<f64>>>,
    /// `mean_theta[s][ti]` = Θ_N(t, 0) of sample s.
    pub theta_origin: Vec<Vec<Complex64>>,
}

impl ChaosSampleTable {
    /// Estimate of E‖⟨∇⟩^{−α}Θ‖^{2p}_{L²} at (time index, α index).
    pub fn l2_moment(&self, ti: usize, ai: usize, p: u32) -> Estimate {
        let v: Vec<f64> = self.l2_sq.iter().map(|s| s[ti][ai].powi(p as i32)).collect();
        Estimate::from_samples(&v)
    }

    /// Estimate of E[(max_x |⟨∇⟩^{−α}Θ|)^{2p}].
    pub fn winf_moment(&self, ti: usize, ai: usize, p: u32) -> Estimate {
        let v: Vec<f64> = self.winf.iter().map(|s| s[ti][ai].powi(2 * p as i32)).collect();
        Estimate::from_samples(&v)
    }

    /// Estimate of E‖Θ‖^{2p}_{L^q_T W^{−α,∞}} with the time norm computed by
    /// trapezoidal quadrature over `times`.
    pub fn lq_time_moment(&self, ai: usize, q: f64, p: u32) -> Estimate {
        let v: Vec<f64> = self
            .winf
            .iter()
            .map(|s| {
                let f: Vec<f64> = s.iter().map(|row| row[ai].powf(q)).collect();
                trapezoid(&self.times, &f).powf(1.0 / q).powi(2 * p as i32)
            })
            .collect();
        Estimate::from_samples(&v)
    }

    /// Estimates of Re and Im of E[Θ_N(t, 0)].
    pub fn mean_theta(&self, ti: usize) -> (Estimate, Estimate) {
        let re: Vec<f64> = self.theta_origin.iter().map(|s| s[ti].re).collect();
        let im: Vec<f64> = self.theta_origin.iter().map(|s| s[ti].im).collect();
        (Estimate::from_samples(&re), Estimate::from_samples(&im))
    }
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Samples Ψ_N along the increasing `times` (exact transitions) for each of
/// `samples` independent streams derived from `stream`, and records the norms
/// of ⟨∇⟩^{−α}Θ_N(t) for every α. Samples run in parallel; the table is in
/// sample order.
pub fn sample_chaos_norms(
    times: &[f64],
    alphas: &[f64],
    beta: f64,
    big_n: usize,
    grid: &TorusGrid,
    samples: usize,
    stream: NoiseStream,
) -> Result<ChaosSampleTable> {
    for a in alphas {
        check_alpha(*a)?;
    }
    if times.is_empty() || times[0] < 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(
            "times must be non-negative and strictly increasing".into(),
        ));
    }
    let sigmas: Vec<f64> = times
        .iter()
        .map(|&t| crate::renorm::sigma_exact(t, big_n, grid))
        .collect::<Result<_>>()?;
    let template = ConvolutionState::new(grid, big_n, stream)?;
    let per_sample: Vec<Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Complex64>)>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut state = template.restarted(stream.with_sample(s as u64));
            let mut l2 = Vec::with_capacity(times.len());
            let mut winf = Vec::with_capacity(times.len());
            let mut origin = Vec::with_capacity(times.len());
            for (ti, &t) in times.iter().enumerate() {
                let dt = t - state.time();
                if dt > 0.0 {
                    state.advance(dt)?;
                }
                let psi = state.psi_field();
                let theta = theta_with_sigma(&psi, t, beta, big_n, sigmas[ti])?;
                let values = theta.values();
                origin.push(values[0]);
                let hat = forward_transform_complex(grid, &values)?;
                let mut l2_row = Vec::with_capacity(alphas.len());
                let mut winf_row = Vec::with_capacity(alphas.len());
                for &alpha in alphas {
                    let smoothed: SpectralField = apply_bessel(&hat, -alpha);
                    l2_row.push(sobolev_norm(&smoothed, 0.0).powi(2));
                    let phys = inverse_transform_complex(&smoothed)?;
                    winf_row.push(phys.iter().map(|c| c.norm()).fold(0.0, f64::max));
                }
                l2.push(l2_row);
                winf.push(winf_row);
            }
            Ok((l2, winf, origin))
        })
        .collect();
    let mut table = ChaosSampleTable {
        times: times.to_vec(),
        alphas: alphas.to_vec(),
        l2_sq: Vec::with_capacity(samples),
        winf: Vec::with_capacity(samples),
        theta_origin: Vec::with_capacity(samples),
    };
    for r in per_sample {
        let (l2, winf, origin) = r?;
        table.l2_sq.push(l2);
        table.winf.push(winf);
        table.theta_origin.push(origin);
    }
    Ok(table)
}

/// Monte Carlo moments of Θ_N(t) at one (t, α).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    /// E‖⟨∇⟩^{−α}Θ_N(t)‖^{2p}_{L²}.
    pub l2: Estimate,
    /// E[(max_x |⟨∇⟩^{−α}Θ_N(t, x)|)^{2p}].
    pub winf: Estimate,
}

#[allow(clippy::too_many_arguments)]
pub fn moment_mc(
    t: f64,
    alpha: f64,
    p: u32,
    beta: f64,
    big_n: usize,
    grid: &TorusGrid,
    samples: usize,
    stream: NoiseStream,
) -> Result<MomentEstimate> {
    if samples < 100 {
        return Err(Error::InvalidParameter(format!(
            "moment estimates need >= 100 samples, got {samples}"
        )));
    }
    if p == 0 {
        return Err(Error::InvalidParameter("moment order p must be >= 1".into()));
    }
    let table = sample_chaos_norms(&[t], &[alpha], beta, big_n, grid, samples, stream)?;
    Ok(MomentEstimate {
        l2: table.l2_moment(0, 0, p),
        winf: table.winf_moment(0, 0, p),
    })
}

/// Fitted decay of the exact difference moments D(N) = E‖⟨∇⟩^{−α}(Θ_N − Θ_{2N})‖².
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauchyRate {
    pub ns: Vec<usize>,
    pub diffs: Vec<f64>,
    /// ε̂ in D(N) ≈ C N^{−ε̂}.
    pub epsilon_hat: f64,
    pub fit: LinearFit,
    /// True when the raw differences decrease strictly.
    pub monotone: bool,
}

pub fn cauchy_rate(t: f64, alpha: f64, beta: f64, ns: &[usize], grid: &TorusGrid) -> Result<CauchyRate> {
    if ns.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "rate fit needs at least 4 truncations, got {}",
            ns.len()
        )));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "truncations must be strictly increasing".into(),
        ));
    }
    let diffs: Vec<f64> = ns
        .iter()
        .map(|&n| second_moment_diff_exact(t, alpha, beta, n, 2 * n, grid))
        .collect::<Result<_>>()?;
    let monotone = diffs.windows(2).all(|w| w[1] < w[0]);
    if !monotone {
        log::warn!("difference moments not monotone: {diffs:?}");
    }
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = diffs.iter().map(|d| d.max(f64::MIN_POSITIVE).ln()).collect();
    let fit = linear_fit(&x, &y);
    Ok(CauchyRate {
        ns: ns.to_vec(),
        diffs,
        epsilon_hat: -fit.slope,
        fit,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn brute_pair_sign_sum(p: usize) -> i32 {
        let set = ChargedPointSet::new(vec![[0.0, 0.0]; 2 * p]).unwrap();
        let mut s = 0;
        for j in 0..2 * p {
            for k in j + 1..2 * p {
                s += set.charge(j) * set.charge(k);
            }
        }
        s
    }

    #[test]
    fn charges_alternate() {
        let set = ChargedPointSet::new(vec![[0.0, 0.0]; 6]).unwrap();
        let charges: Vec<i32> = (0..6).map(|i| set.charge(i)).collect();
        assert_eq!(charges, vec![-1, 1, -1, 1, -1, 1]);
        assert!(ChargedPointSet::new(vec![[0.0, 0.0]; 3]).is_err());
    }

    #[test]
    fn torus_distance_wraps() {
        assert_relative_eq!(torus_distance([0.1, 0.0], [2.0 * PI - 0.1, 0.0]), 0.2, epsilon = 1e-12);
        assert_relative_eq!(torus_distance([0.0, 0.0], [PI, PI]), PI * 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn single_dipole_is_exact() {
        let set = ChargedPointSet::new(vec![[0.3, 1.0], [1.1, 2.5]]).unwrap();
        let d = torus_distance([0.3, 1.0], [1.1, 2.5]);
        for (lambda, n) in [(0.5, 10.0), (2.0, f64::INFINITY)] {
            let ip = interaction_product(&set, lambda, n);
            assert_relative_eq!(ip, -lambda * (d + 1.0 / n).ln(), max_relative = 1e-14);
            let db = dipole_bound(&set, lambda, n).unwrap();
            assert_eq!(db.ln_value, ip);
        }
    }

    #[test]
    fn coincident_points() {
        for p in 1..=4 {
            let set = ChargedPointSet::new(vec![[1.0, 1.0]; 2 * p]).unwrap();
            let n = 50.0;
            let exponent = brute_pair_sign_sum(p) as f64;
            // Σ_{j<k} ε_jε_k = ((Σε)² − 2p)/2 = −p
            assert_eq!(exponent, -(p as f64));
            let lambda = 0.7;
            assert_relative_eq!(
                interaction_product(&set, lambda, n),
                lambda * exponent * (1.0 / n).ln(),
                max_relative = 1e-13
            );
        }
        let merged = ChargedPointSet::new(vec![[1.0, 1.0]; 2]).unwrap();
        assert_eq!(interaction_product(&merged, 1.0, f64::INFINITY), f64::INFINITY);
    }

    #[test]
    fn relabelling_invariance() {
        let pts = vec![[0.1, 0.2], [1.0, 1.5], [3.0, 0.4], [2.2, 5.0], [4.0, 4.0], [5.5, 0.9]];
        let set = ChargedPointSet::new(pts.clone()).unwrap();
        let mut swapped = pts;
        swapped.swap(1, 3); // two positive charges
        let other = ChargedPointSet::new(swapped).unwrap();
        assert_relative_eq!(
            interaction_product(&set, 1.3, 20.0),
            interaction_product(&other, 1.3, 20.0),
            max_relative = 1e-13
        );
        assert_relative_eq!(
            dipole_bound(&set, 1.3, 20.0).unwrap().ln_value,
            dipole_bound(&other, 1.3, 20.0).unwrap().ln_value,
            max_relative = 1e-13
        );
    }

    #[test]
    fn nearest_neighbour_pairing_wins() {
        // tight dipole (y1, y2) and a far pair (y3, y4)
        let set = ChargedPointSet::new(vec![[1.0, 1.0], [1.01, 1.0], [4.0, 4.0], [4.5, 3.0]]).unwrap();
        let db = dipole_bound(&set, 1.0, 1e3).unwrap();
        assert_eq!(db.pairing, vec![0, 1]);
        let ln = |a: [f64; 2], b: [f64; 2]| (torus_distance(a, b) + 1e-3).ln();
        let p = set.points();
        let identity = -(ln(p[1], p[0]) + ln(p[3], p[2]));
        let crossed = -(ln(p[1], p[2]) + ln(p[3], p[0]));
        assert!(identity > crossed);
        assert_eq!(db.ln_value, identity);
    }

    #[test]
    fn dipole_limits() {
        let set = ChargedPointSet::new(vec![[0.0, 0.0]; 18]).unwrap();
        assert!(dipole_bound(&set, 1.0, 10.0).is_err());
        let empty = ChargedPointSet::new(vec![]).unwrap();
        assert_eq!(interaction_product(&empty, 1.0, 10.0), 0.0);
        assert_eq!(dipole_bound(&empty, 1.0, 10.0).unwrap().ln_value, 0.0);
    }

    #[test]
    fn scan_p1_ratio_is_one_and_small_lambda_limit() {
        let rows = cancellation_ratio_scan(1, &[0.5, 2.0], &[1.0, 1e3], 200, 3).unwrap();
        for r in rows {
            assert_relative_eq!(r.max_ratio, 1.0, max_relative = 1e-13);
        }
        let rows = cancellation_ratio_scan(3, &[1e-9], &[10.0], 50, 3).unwrap();
        assert_relative_eq!(rows[0].max_ratio, 1.0, epsilon = 1e-6);
        assert!(cancellation_ratio_scan(2, &[1.0], &[1.0], 0, 3).is_err());
    }

    #[test]
    fn second_moment_of_constant() {
        let g = TorusGrid::resolving(8);
        for alpha in [0.0, 0.3, 1.0] {
            let m = second_moment_exact(0.5, alpha, 0.0, 8, &g).unwrap();
            assert_relative_eq!(m, 4.0 * PI * PI, max_relative = 1e-12);
        }
        // quadrature oracle: ‖1‖²_{L²} = (2π)²
        let quad = g.cell_area() * g.len() as f64;
        assert_relative_eq!(quad, 4.0 * PI * PI, max_relative = 1e-12);
    }

    #[test]
    fn second_moment_at_alpha_zero_is_gamma_squared() {
        // E‖Θ‖²_{L²} = (2π)² e^{β²σ_N}
        let g = TorusGrid::resolving(16);
        let (t, beta) = (0.4, PI.sqrt());
        let sigma = crate::renorm::sigma_exact(t, 16, &g).unwrap();
        let m = second_moment_exact(t, 0.0, beta, 16, &g).unwrap();
        assert_relative_eq!(m, 4.0 * PI * PI * (beta * beta * sigma).exp(), max_relative = 1e-11);
    }

    #[test]
    fn difference_moment_edges() {
        let g = TorusGrid::resolving(32);
        assert_eq!(second_moment_diff_exact(0.25, 0.3, 1.5, 16, 16, &g).unwrap(), 0.0);
        assert!(second_moment_diff_exact(0.25, 0.3, 1.5, 16, 8, &g).is_err());
        assert!(second_moment_diff_exact(0.25, 0.3, 1.5, 16, 32, &g).unwrap() > 0.0);
    }

    #[test]
    fn dynamic_range_refused() {
        let g = TorusGrid::resolving(64);
        let err = second_moment_exact(1.0, 0.2, 30.0, 64, &g).unwrap_err();
        assert!(matches!(err, Error::DynamicRange { .. }));
    }

    #[test]
    fn cauchy_rate_input_checks() {
        let g = TorusGrid::resolving(64);
        assert!(cauchy_rate(0.25, 0.3, 1.0, &[4, 4, 4, 4], &g).is_err());
        assert!(cauchy_rate(0.25, 0.3, 1.0, &[4, 8, 16], &g).is_err());
    }

    #[test]
    fn moment_mc_needs_samples() {
        let g = TorusGrid::resolving(4);
        assert!(moment_mc(0.1, 0.1, 1, 1.0, 4, &g, 10, NoiseStream::new(1, 0, 0)).is_err());
    }

    #[test]
    fn mc_second_moment_matches_exact_small() {
        let n = 8;
        let g = TorusGrid::resolving(n);
        let (t, alpha, beta) = (0.5, 0.2, PI.sqrt());
        let est = moment_mc(t, alpha, 1, beta, n, &g, 4000, NoiseStream::new(12, 1, 0)).unwrap();
        let exact = second_moment_exact(t, alpha, beta, n, &g).unwrap();
        assert!(est.l2.within(exact, 3.0), "{} ± {} vs {exact}", est.l2.mean, est.l2.se);
    }
}
