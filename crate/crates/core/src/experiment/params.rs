//! Parameter tables of the experiment kinds. Every field has a default.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Finding, Params, Severity};
use crate::solver::{Mode, DEFAULT_BLOWUP_FACTOR, DEFAULT_EPSILON};

fn dyadic_ns() -> Vec<usize> {
    vec![32, 64, 128, 256, 512]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SigmaParams {
    pub t: f64,
    pub ns: Vec<usize>,
    /// Grid size for every N; 0 picks the smallest resolving grid per N.
    pub grid_size: usize,
    /// Allowed relative deviation of the fitted slope from t/(4π).
    pub slope_tolerance: f64,
}

impl Default for SigmaParams {
    fn default() -> Self {
        Self {
            t: 0.5,
            ns: dyadic_ns(),
            grid_size: 0,
            slope_tolerance: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreenParams {
    pub ns: Vec<usize>,
    pub grid_size: usize,
    /// Recorded bound on max − min of P_N²G(x) + (1/2π)log(|x| + 1/N).
    pub spread_bound: f64,
    /// Allowed relative deviation of the origin slope from 1/(2π).
    pub slope_tolerance: f64,
}

impl Default for GreenParams {
    fn default() -> Self {
        Self {
            ns: dyadic_ns(),
            grid_size: 0,
            spread_bound: crate::covariance::GREEN_SPREAD_BOUND,
            slope_tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GammaParams {
    pub t: f64,
    pub n: usize,
    pub grid_size: usize,
    pub samples: usize,
    /// Probe displacements in grid cells.
    pub offsets: Vec<[i64; 2]>,
    /// Agreement threshold in standard errors.
    pub max_z: f64,
}

impl Default for GammaParams {
    fn default() -> Self {
        Self {
            t: 0.25,
            n: 64,
            grid_size: 0,
            samples: 10_000,
            offsets: vec![[0, 0], [1, 0], [0, 3], [4, 4], [16, 0]],
            max_z: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HrwParams {
    pub a: Vec<f64>,
    pub r: Vec<f64>,
    /// Recorded constant C in residual <= C·min(1, R/√a)/√a.
    pub ratio_bound: f64,
}

impl Default for HrwParams {
    fn default() -> Self {
        Self {
            a: vec![1.0, 4.0, 16.0, 64.0, 256.0],
            r: vec![1.0, 10.0, 100.0, 1000.0],
            ratio_bound: crate::covariance::HRW_RATIO_BOUND,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProdParams {
    pub ps: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub ns: Vec<f64>,
    pub trials: usize,
    /// Largest tolerated max-ratio factor between the largest and the
    /// second N of the list.
    pub uniformity_factor: f64,
}

impl Default for ProdParams {
    fn default() -> Self {
        Self {
            ps: vec![1, 2, 3, 4],
            lambdas: vec![0.5, 1.0, 2.0],
            ns: vec![1.0, 10.0, 100.0, 1000.0],
            trials: 1000,
            uniformity_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChaosParams {
    pub times: Vec<f64>,
    pub alphas: Vec<f64>,
    pub beta_sq: f64,
    pub n: usize,
    pub grid_size: usize,
    pub p: u32,
    pub samples: usize,
    pub max_z: f64,
    /// Threshold scan: t, N list and the two α values.
    pub threshold_t: f64,
    pub threshold_ns: Vec<usize>,
    pub bounded_alpha: f64,
    pub divergent_alpha: f64,
    /// Largest relative variation over N at `bounded_alpha`.
    pub bounded_variation: f64,
    /// Smallest growth factor per doubling at `divergent_alpha`.
    pub divergent_growth: f64,
    /// Hermite generating-function check on |t|, |x| <= range, σ in [0, sigma_max].
    pub hermite_terms: usize,
    pub hermite_range: f64,
    pub hermite_sigma_max: f64,
    pub hermite_tolerance: f64,
}

impl Default for ChaosParams {
    fn default() -> Self {
        Self {
            times: vec![0.1, 0.25, 0.5],
            alphas: vec![0.1, 0.2, 0.4],
            beta_sq: PI,
            n: 32,
            grid_size: 0,
            p: 1,
            samples: 10_000,
            max_z: 3.0,
            threshold_t: 0.5,
            threshold_ns: vec![32, 64, 128, 256],
            bounded_alpha: 0.15,
            divergent_alpha: 0.01,
            bounded_variation: 0.1,
            divergent_growth: 1.2,
            hermite_terms: 40,
            hermite_range: 2.0,
            hermite_sigma_max: 2.0,
            hermite_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CauchyParams {
    pub t: f64,
    pub alpha: f64,
    pub beta_sq: f64,
    pub ns: Vec<usize>,
    /// Grid for all runs; 0 picks the grid resolving 2·max N.
    pub grid_size: usize,
}

impl Default for CauchyParams {
    fn default() -> Self {
        Self {
            t: 0.25,
            alpha: 0.3,
            beta_sq: PI,
            ns: vec![16, 32, 64, 128],
            grid_size: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveParams {
    pub n: usize,
    pub grid_size: usize,
    pub mode: Mode,
    pub beta_sq: f64,
    pub h: f64,
    pub t_end: f64,
    /// Data A cos(x₁) with ‖u₀‖_{H^s} = data_norm, u₁ = 0.
    pub s: f64,
    pub data_norm: f64,
    pub epsilon: f64,
    pub sample: u64,
    pub noise: bool,
    pub blowup_factor: f64,
    /// Physical-space snapshots every k steps; 0 disables them.
    pub snapshot_every: usize,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            n: 64,
            grid_size: 0,
            mode: Mode::Renormalized,
            beta_sq: PI,
            h: 0.01,
            t_end: 0.5,
            s: 0.5,
            data_norm: 1.0,
            epsilon: DEFAULT_EPSILON,
            sample: 0,
            noise: true,
            blowup_factor: DEFAULT_BLOWUP_FACTOR,
            snapshot_every: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuessKind {
    Zero,
    FreeFlow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardParams {
    pub n: usize,
    pub grid_size: usize,
    pub beta_sq: f64,
    pub h: f64,
    pub t_end: f64,
    pub s: f64,
    pub data_norm: f64,
    pub sample: u64,
    pub iterations: usize,
    pub guess: GuessKind,
    /// s values whose Strichartz pairs are tabulated and checked.
    pub pair_s: Vec<f64>,
}

impl Default for PicardParams {
    fn default() -> Self {
        Self {
            n: 64,
            grid_size: 0,
            beta_sq: PI,
            h: 0.005,
            t_end: 0.05,
            s: 0.5,
            data_norm: 1.0,
            sample: 0,
            iterations: 6,
            guess: GuessKind::Zero,
            pair_s: (1..=9).map(|k| k as f64 / 10.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrivialityParams {
    pub ns: Vec<usize>,
    pub beta_sq: f64,
    pub t_end: f64,
    pub h: f64,
    pub s: f64,
    pub data_norm: f64,
    pub epsilon: f64,
    pub realizations: usize,
    pub min_r_squared: f64,
    /// Coupled renormalized runs at N and 2N; skipped when
    /// `coupled_realizations` is 0.
    pub coupled_ns: Vec<usize>,
    pub coupled_t_end: f64,
    pub coupled_h: f64,
    pub coupled_realizations: usize,
}

impl Default for TrivialityParams {
    fn default() -> Self {
        let base = crate::solver::TrivialityConfig::default();
        Self {
            ns: base.ns,
            beta_sq: base.beta * base.beta,
            t_end: base.t_end,
            h: base.h,
            s: base.s,
            data_norm: base.data_norm,
            epsilon: base.epsilon,
            realizations: base.realizations,
            min_r_squared: 0.9,
            coupled_ns: vec![32, 64, 128, 256],
            coupled_t_end: 0.1,
            coupled_h: 0.005,
            coupled_realizations: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManufacturedParams {
    pub grid_size: usize,
    pub beta_sq: f64,
    pub t_end: f64,
    pub hs: Vec<f64>,
    pub ratio_range: [f64; 2],
    /// Linear single-mode run against its closed form.
    pub mode: [i64; 2],
    pub mode_h: f64,
    pub mode_t_end: f64,
    pub mode_tolerance: f64,
}

impl Default for ManufacturedParams {
    fn default() -> Self {
        Self {
            grid_size: 32,
            beta_sq: 1.0,
            t_end: 1.0,
            hs: vec![0.1, 0.05, 0.025, 0.0125],
            ratio_range: [3.5, 4.5],
            mode: [2, 1],
            mode_h: 0.01,
            mode_t_end: 1.0,
            mode_tolerance: 1e-10,
        }
    }
}

#[derive(Default)]
pub(super) struct Findings(Vec<Finding>);

impl Findings {
    fn error(&mut self, message: String) {
        self.0.push(Finding {
            severity: Severity::Error,
            message,
        });
    }

    fn warning(&mut self, message: String) {
        self.0.push(Finding {
            severity: Severity::Warning,
            message,
        });
    }

    pub fn into_vec(self) -> Vec<Finding> {
        self.0
    }

    fn positive(&mut self, name: &str, v: f64) {
        if !(v > 0.0 && v.is_finite()) {
            self.error(format!("{name} must be positive, got {v}"));
        }
    }

    fn non_negative(&mut self, name: &str, v: f64) {
        if !(v >= 0.0 && v.is_finite()) {
            self.error(format!("{name} must be >= 0, got {v}"));
        }
    }

    fn increasing(&mut self, name: &str, ns: &[usize]) {
        if ns.is_empty() || ns[0] == 0 || ns.windows(2).any(|w| w[1] <= w[0]) {
            self.error(format!("{name} must be a non-empty increasing list of positive integers"));
        }
    }

    fn min_len(&mut self, name: &str, len: usize, min: usize) {
        if len < min {
            self.error(format!("{name} needs at least {min} entries, got {len}"));
        }
    }

    /// M >= 2N + 2 when the grid is fixed explicitly.
    fn grid(&mut self, grid_size: usize, n: usize) {
        if grid_size == 0 {
            return;
        }
        if grid_size % 2 != 0 || grid_size < 4 {
            self.error(format!("grid_size must be even and >= 4, got {grid_size}"));
        } else if grid_size < 2 * n + 2 {
            self.error(format!(
                "grid M = {grid_size} under-resolves N = {n} (need M >= 2N + 2 = {})",
                2 * n + 2
            ));
        }
    }

    /// β²T < 8πα.
    fn envelope(&mut self, beta_sq: f64, t: f64, alpha: f64) {
        if beta_sq * t >= 8.0 * PI * alpha {
            self.warning(format!(
                "β²T = {:.4} >= 8πα = {:.4} (β² = {beta_sq}, T = {t}, α = {alpha}): outside the regime where the chaos is controlled",
                beta_sq * t,
                8.0 * PI * alpha
            ));
        }
    }

    fn step(&mut self, h: f64, t_end: f64) {
        self.positive("h", h);
        self.positive("t_end", t_end);
        let k = (t_end / h).round();
        if h > 0.0 && (k < 1.0 || (k * h - t_end).abs() > 1e-9 * t_end.max(1.0)) {
            self.error(format!("t_end = {t_end} is not a positive multiple of h = {h}"));
        }
    }
}

pub(super) fn validate(params: &Params, f: &mut Findings) {
    match params {
        Params::SigmaAsymptotics(p) => {
            f.non_negative("t", p.t);
            f.increasing("ns", &p.ns);
            f.min_len("ns", p.ns.len(), 2);
            f.grid(p.grid_size, p.ns.last().copied().unwrap_or(0));
            f.positive("slope_tolerance", p.slope_tolerance);
        }
        Params::GreenCheck(p) => {
            f.increasing("ns", &p.ns);
            f.min_len("ns", p.ns.len(), 2);
            f.grid(p.grid_size, p.ns.last().copied().unwrap_or(0));
            f.positive("spread_bound", p.spread_bound);
            f.positive("slope_tolerance", p.slope_tolerance);
        }
        Params::GammaCheck(p) => {
            f.non_negative("t", p.t);
            f.increasing("n", &[p.n]);
            f.grid(p.grid_size, p.n);
            f.min_len("samples", p.samples, 2);
            f.min_len("offsets", p.offsets.len(), 1);
            f.positive("max_z", p.max_z);
        }
        Params::HrwCheck(p) => {
            for &a in &p.a {
                if !(a >= 1.0 && a.is_finite()) {
                    f.error(format!("a must be >= 1, got {a}"));
                }
            }
            for &r in &p.r {
                if !(r >= 1.0 && r.is_finite()) {
                    f.error(format!("R must be >= 1, got {r}"));
                }
            }
            f.min_len("a", p.a.len(), 1);
            f.min_len("r", p.r.len(), 1);
        }
        Params::ProdScan(p) => {
            for &k in &p.ps {
                if k == 0 || k > 4 {
                    f.error(format!("p must lie in 1..=4, got {k}"));
                }
            }
            for &l in &p.lambdas {
                f.positive("lambda", l);
            }
            for &n in &p.ns {
                if !(n >= 1.0 && n.is_finite()) {
                    f.error(format!("N must be >= 1, got {n}"));
                }
            }
            f.min_len("ns", p.ns.len(), 2);
            f.min_len("trials", p.trials, 1);
        }
        Params::ChaosMoments(p) => {
            f.positive("beta_sq", p.beta_sq);
            f.increasing("n", &[p.n]);
            f.grid(p.grid_size, p.n);
            if p.times.is_empty() || p.times[0] < 0.0 || p.times.windows(2).any(|w| w[1] <= w[0]) {
                f.error("times must be a non-empty increasing list of non-negative values".into());
            }
            for &a in &p.alphas {
                f.non_negative("alpha", a);
            }
            if p.p == 0 {
                f.error("moment order p must be >= 1".into());
            }
            if p.samples < 100 {
                f.error(format!("samples must be >= 100, got {}", p.samples));
            }
            for &t in &p.times {
                for &a in &p.alphas {
                    f.envelope(p.beta_sq, t, a);
                }
            }
            f.increasing("threshold_ns", &p.threshold_ns);
            f.min_len("threshold_ns", p.threshold_ns.len(), 2);
            f.envelope(p.beta_sq, p.threshold_t, p.bounded_alpha);
            if p.hermite_terms > crate::renorm::MAX_HERMITE_DEGREE {
                f.error(format!("hermite_terms must be <= {}", crate::renorm::MAX_HERMITE_DEGREE));
            }
            f.non_negative("hermite_sigma_max", p.hermite_sigma_max);
            f.non_negative("hermite_range", p.hermite_range);
        }
        Params::CauchyRate(p) => {
            f.non_negative("t", p.t);
            f.non_negative("alpha", p.alpha);
            f.positive("beta_sq", p.beta_sq);
            f.increasing("ns", &p.ns);
            f.min_len("ns", p.ns.len(), 4);
            f.grid(p.grid_size, 2 * p.ns.last().copied().unwrap_or(0));
            f.envelope(p.beta_sq, p.t, p.alpha);
        }
        Params::Solve(p) => {
            f.increasing("n", &[p.n]);
            f.grid(p.grid_size, p.n);
            f.non_negative("beta_sq", p.beta_sq);
            f.step(p.h, p.t_end);
            f.non_negative("data_norm", p.data_norm);
            f.non_negative("epsilon", p.epsilon);
            if !(p.blowup_factor > 1.0) {
                f.error(format!("blowup_factor must exceed 1, got {}", p.blowup_factor));
            }
            if p.mode == Mode::Renormalized && p.noise {
                f.envelope(p.beta_sq, p.t_end, 1.0);
            }
        }
        Params::Picard(p) => {
            f.increasing("n", &[p.n]);
            f.grid(p.grid_size, p.n);
            f.non_negative("beta_sq", p.beta_sq);
            f.step(p.h, p.t_end);
            if !(p.s > 0.0 && p.s < 1.0) {
                f.error(format!("s must lie in (0, 1), got {}", p.s));
            }
            for &s in &p.pair_s {
                if !(s > 0.0 && s < 1.0) {
                    f.error(format!("pair_s entries must lie in (0, 1), got {s}"));
                }
            }
            if p.iterations < 2 {
                f.error("iterations must be >= 2".into());
            }
            f.envelope(p.beta_sq, p.t_end, 1.0);
        }
        Params::Triviality(p) => {
            f.increasing("ns", &p.ns);
            f.min_len("ns", p.ns.len(), 2);
            f.non_negative("beta_sq", p.beta_sq);
            f.step(p.h, p.t_end);
            f.non_negative("data_norm", p.data_norm);
            f.non_negative("epsilon", p.epsilon);
            f.min_len("realizations", p.realizations, 1);
            if p.coupled_realizations > 0 {
                f.increasing("coupled_ns", &p.coupled_ns);
                f.min_len("coupled_ns", p.coupled_ns.len(), 2);
                f.step(p.coupled_h, p.coupled_t_end);
                f.envelope(p.beta_sq, p.coupled_t_end, 1.0);
            }
        }
        Params::ManufacturedConvergence(p) => {
            f.grid(p.grid_size, 1);
            if p.grid_size == 0 {
                f.error("grid_size must be set explicitly".into());
            }
            f.non_negative("beta_sq", p.beta_sq);
            f.min_len("hs", p.hs.len(), 2);
            for &h in &p.hs {
                f.step(h, p.t_end);
            }
            f.step(p.mode_h, p.mode_t_end);
            if p.ratio_range[0] > p.ratio_range[1] {
                f.error("ratio_range must be [low, high]".into());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{validate as validate_spec, ExperimentSpec, Kind};
    use super::*;

    fn findings(params: Params) -> Vec<Finding> {
        validate_spec(&ExperimentSpec::new("v", params))
    }

    #[test]
    fn defaults_are_clean() {
        for k in Kind::ALL {
            let f = findings(Params::default_for(k));
            assert!(f.is_empty(), "{k}: {f:?}");
        }
    }

    #[test]
    fn envelope_boundary_warns() {
        let p = SolveParams {
            beta_sq: 8.0 * PI,
            t_end: 1.1,
            h: 0.1,
            ..Default::default()
        };
        let f = findings(Params::Solve(p));
        assert_eq!(f.len(), 1, "{f:?}");
        assert_eq!(f[0].severity, Severity::Warning);
    }

    #[test]
    fn under_resolution_is_an_error() {
        let p = SolveParams {
            n: 64,
            grid_size: 64,
            ..Default::default()
        };
        let f = findings(Params::Solve(p));
        assert!(f.iter().any(|x| x.severity == Severity::Error && x.message.contains("under-resolves")));
        let ok = SolveParams {
            n: 64,
            grid_size: 130,
            ..Default::default()
        };
        assert!(findings(Params::Solve(ok)).is_empty());
    }

    #[test]
    fn range_errors() {
        let p = ChaosParams {
            samples: 10,
            times: vec![0.5, 0.1],
            ..Default::default()
        };
        let f = findings(Params::ChaosMoments(p));
        assert!(f.iter().filter(|x| x.severity == Severity::Error).count() >= 2);
        let q = SolveParams {
            h: 0.03,
            t_end: 0.1,
            ..Default::default()
        };
        assert!(!findings(Params::Solve(q)).is_empty());
    }
}
