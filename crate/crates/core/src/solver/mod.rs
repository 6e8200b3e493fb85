//! Dynamics of the remainder v_N = u_N − Ψ_N.
//!
//! With u_N = Ψ_N + v_N the remainder solves
//!
//! ```text
//! ∂ₜ²v + (1 − Δ)v + Im(Θ_N e^{iβv}) = 0,   (v, ∂ₜv)(0) = (u₀, u₁)
//! ```
//!
//! in the renormalized mode. The unrenormalized mode replaces Θ_N by
//! γ_N⁻¹Θ_N = e^{iβΨ_N}, and the linear mode drops the nonlinearity.
//!
//! Time stepping is an exponential integrator in the interaction picture:
//! with U = (v̂, ∂ₜv̂), E(h) the exact Klein–Gordon flow and G(t, U) the
//! nonlinear forcing,
//!
//! ```text
//! U* = E(h)(Uₙ + hGₙ)
//! Uₙ₊₁ = E(h)(Uₙ + (h/2)Gₙ) + (h/2)G(tₙ₊₁, U*)
//! ```
//!
//! i.e. the trapezoidal rule for the Duhamel integral with an explicit
//! predictor at the right node. The nonlinearity is evaluated pointwise on
//! the grid with no dealiasing.

mod picard;
mod strichartz;
mod triviality;

pub use picard::{picard_iterate, xs_norm, InitialGuess, PicardReport};
pub use strichartz::{strichartz_pairs, StrichartzPair};
pub use triviality::{
    coupled_convergence, manufactured_convergence, single_mode_error, triviality_experiment, CoupledConvergence,
    ManufacturedReport, TrivialityConfig, TrivialityReport, TrivialityRow,
};

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::noise::NoiseStream;
use crate::renorm::{theta_with_sigma, ChaosField, SigmaTable};
use crate::spectral::{
    bracket, forward_transform, inverse_transform, sobolev_norm, SobolevWeights, SpectralField, TorusGrid,
};
use crate::stoch_conv::ConvolutionState;
use crate::{Error, Result};

/// Default ε of the H^{−ε} comparison norm.
pub const DEFAULT_EPSILON: f64 = 0.1;

/// Default blow-up guard: halt once ‖v‖_{H^s} exceeds this multiple of the
/// initial scale.
pub const DEFAULT_BLOWUP_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Renormalized,
    Unrenormalized,
    Linear,
}

/// (v, ∂ₜv) at time t, stored spectrally. `s` is the regularity label of
/// the data.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub v: SpectralField,
    pub vt: SpectralField,
    pub t: f64,
    pub s: f64,
}

impl WaveState {
    pub fn new(v: SpectralField, vt: SpectralField, t: f64, s: f64) -> Result<Self> {
        if v.grid() != vt.grid() {
            return Err(Error::InvalidGrid("v and ∂ₜv live on different grids".into()));
        }
        if !v.is_real() || !vt.is_real() {
            return Err(Error::InvalidParameter("wave state fields must be real".into()));
        }
        for f in [&v, &vt] {
            if let Some(index) = f.coeffs().iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
                return Err(Error::NonFinite { index });
            }
        }
        Ok(Self { v, vt, t, s })
    }

    pub fn zeros(grid: &TorusGrid, s: f64) -> Self {
        Self {
            v: SpectralField::zeros(grid, true),
            vt: SpectralField::zeros(grid, true),
            t: 0.0,
            s,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        self.v.grid()
    }

    pub fn v_field(&self) -> Result<Vec<f64>> {
        inverse_transform(&self.v)
    }

    pub fn vt_field(&self) -> Result<Vec<f64>> {
        inverse_transform(&self.vt)
    }

    /// ‖⟨∇⟩v‖²_{L²} + ‖∂ₜv‖²_{L²}, conserved by the linear flow.
    pub fn energy(&self) -> f64 {
        sobolev_norm(&self.v, 1.0).powi(2) + sobolev_norm(&self.vt, 0.0).powi(2)
    }

    /// ‖v‖_{H^s} + ‖∂ₜv‖_{H^{s−1}}.
    pub fn data_norm(&self, s: f64) -> f64 {
        sobolev_norm(&self.v, s) + sobolev_norm(&self.vt, s - 1.0)
    }

    /// Componentwise difference, keeping this state's time.
    pub fn difference(&self, other: &WaveState) -> WaveState {
        WaveState {
            v: self.v.sub(&other.v),
            vt: self.vt.sub(&other.vt),
            t: self.t,
            s: self.s,
        }
    }
}

/// Cached per-mode rotation tables for the Klein–Gordon flow over one step.
#[derive(Debug, Clone)]
pub struct Propagator {
    h: f64,
    cos: Vec<f64>,
    sin_over_w: Vec<f64>,
    w_sin: Vec<f64>,
}

impl Propagator {
    /// Any finite h; negative h runs the flow backwards.
    pub fn new(grid: &TorusGrid, h: f64) -> Result<Self> {
        if !h.is_finite() {
            return Err(Error::InvalidParameter(format!("step must be finite, got {h}")));
        }
        let tables: Vec<(f64, f64, f64)> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let w = bracket(grid.frequency(i));
                let (s, c) = (h * w).sin_cos();
                (c, s / w, w * s)
            })
            .collect();
        Ok(Self {
            h,
            cos: tables.iter().map(|x| x.0).collect(),
            sin_over_w: tables.iter().map(|x| x.1).collect(),
            w_sin: tables.iter().map(|x| x.2).collect(),
        })
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    /// In-place (a, b) ← E(h)(a, b).
    pub fn apply(&self, a: &mut [Complex64], b: &mut [Complex64]) {
        a.par_iter_mut().zip(b.par_iter_mut()).enumerate().for_each(|(i, (x, y))| {
            let (x0, y0) = (*x, *y);
            *x = x0 * self.cos[i] + y0 * self.sin_over_w[i];
            *y = y0 * self.cos[i] - x0 * self.w_sin[i];
        });
    }
}

/// Exact homogeneous Klein–Gordon flow over time h.
pub fn linear_propagate(state: &WaveState, h: f64) -> Result<WaveState> {
    let prop = Propagator::new(state.grid(), h)?;
    let mut a = state.v.coeffs().to_vec();
    let mut b = state.vt.coeffs().to_vec();
    prop.apply(&mut a, &mut b);
    Ok(WaveState {
        v: SpectralField::from_coeffs(state.grid(), a, true)?,
        vt: SpectralField::from_coeffs(state.grid(), b, true)?,
        t: state.t + h,
        s: state.s,
    })
}

/// Forcing data available at one quadrature node.
#[derive(Debug, Clone, Copy, Default)]
pub struct ForcingNode<'a> {
    /// Θ at the node; `None` means Θ ≡ 0.
    pub theta: Option<&'a ChaosField>,
    /// Additional source term f̂ added to ∂ₜ²v + (1 − Δ)v = −Im(Θe^{iβv}) + f.
    pub extra: Option<&'a SpectralField>,
}

/// Pointwise nonlinearity Im(Θ e^{iβv}) for the given mode.
pub fn nonlinearity(mode: Mode, beta: f64, theta: &ChaosField, v: &[f64]) -> Result<Vec<f64>> {
    if theta.phase().len() != v.len() {
        return Err(Error::InvalidGrid("Θ and v sampled on different grids".into()));
    }
    let phase = theta.phase();
    let out: Vec<f64> = match mode {
        Mode::Linear => vec![0.0; v.len()],
        Mode::Unrenormalized => v
            .par_iter()
            .zip(phase.par_iter())
            .map(|(&x, p)| (p * Complex64::from_polar(1.0, beta * x)).im)
            .collect(),
        Mode::Renormalized => {
            let g = theta.gamma().value();
            v.par_iter()
                .zip(phase.par_iter())
                .map(|(&x, p)| g * (p * Complex64::from_polar(1.0, beta * x)).im)
                .collect()
        }
    };
    if let Some(index) = out.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(out)
}

/// One-step map of the exponential integrator, reusable across steps.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub mode: Mode,
    pub beta: f64,
    prop: Propagator,
}

impl Stepper {
    pub fn new(grid: &TorusGrid, mode: Mode, beta: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {h}")));
        }
        Ok(Self {
            mode,
            beta,
            prop: Propagator::new(grid, h)?,
        })
    }

    pub fn h(&self) -> f64 {
        self.prop.h
    }

    pub fn propagator(&self) -> &Propagator {
        &self.prop
    }

    /// Spectral forcing G₂ = f̂ − (Im Θe^{iβv})^ at a node, or `None` if it
    /// vanishes identically.
    pub fn forcing(&self, node: &ForcingNode<'_>, v: &SpectralField) -> Result<Option<Vec<Complex64>>> {
        let mut g: Option<Vec<Complex64>> = None;
        if let (Some(theta), false) = (node.theta, self.mode == Mode::Linear) {
            let phys = inverse_transform(v)?;
            let nl = nonlinearity(self.mode, self.beta, theta, &phys)?;
            let hat = forward_transform(v.grid(), &nl)?;
            g = Some(hat.into_coeffs().into_iter().map(|c| -c).collect());
        }
        if let Some(extra) = node.extra {
            if extra.grid() != v.grid() {
                return Err(Error::InvalidGrid("forcing on a different grid".into()));
            }
            if let Some(index) = extra.coeffs().iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
                return Err(Error::NonFinite { index });
            }
            match g.as_mut() {
                Some(g) => g.iter_mut().zip(extra.coeffs()).for_each(|(x, e)| *x += e),
                None => g = Some(extra.coeffs().to_vec()),
            }
        }
        Ok(g)
    }

    /// Advances `state` by one step given the forcing at tₙ and tₙ₊₁.
    pub fn step(&self, state: &WaveState, start: &ForcingNode<'_>, end: &ForcingNode<'_>) -> Result<WaveState> {
        let grid = state.grid();
        let h = self.prop.h;
        let g0 = self.forcing(start, &state.v)?;
        let mut a = state.v.coeffs().to_vec();
        let mut b = state.vt.coeffs().to_vec();
        let Some(g0) = g0 else {
            if end.theta.is_none() && end.extra.is_none() {
                self.prop.apply(&mut a, &mut b);
                return self.finish(grid, a, b, state);
            }
            // G vanishes at the left node only
            self.prop.apply(&mut a, &mut b);
            let v_star = SpectralField::from_coeffs(grid, a.clone(), true)?;
            if let Some(g1) = self.forcing(end, &v_star)? {
                b.iter_mut().zip(&g1).for_each(|(y, g)| *y += g * (0.5 * h));
            }
            return self.finish(grid, a, b, state);
        };
        // predictor U* = E(h)(Uₙ + hGₙ)
        let mut pa = a.clone();
        let mut pb: Vec<Complex64> = b.iter().zip(&g0).map(|(y, g)| y + g * h).collect();
        self.prop.apply(&mut pa, &mut pb);
        let v_star = SpectralField::from_coeffs(grid, pa, true)?;
        let g1 = self.forcing(end, &v_star)?;
        b.iter_mut().zip(&g0).for_each(|(y, g)| *y += g * (0.5 * h));
        self.prop.apply(&mut a, &mut b);
        if let Some(g1) = g1 {
            b.iter_mut().zip(&g1).for_each(|(y, g)| *y += g * (0.5 * h));
        }
        self.finish(grid, a, b, state)
    }

    fn finish(&self, grid: &TorusGrid, a: Vec<Complex64>, b: Vec<Complex64>, state: &WaveState) -> Result<WaveState> {
        Ok(WaveState {
            v: SpectralField::from_coeffs(grid, a, true)?,
            vt: SpectralField::from_coeffs(grid, b, true)?,
            t: state.t + self.prop.h,
            s: state.s,
        })
    }
}

/// Free-function form of [`Stepper::step`].
pub fn duhamel_step(
    state: &WaveState,
    mode: Mode,
    beta: f64,
    start: &ForcingNode<'_>,
    end: &ForcingNode<'_>,
    h: f64,
) -> Result<WaveState> {
    Stepper::new(state.grid(), mode, beta, h)?.step(state, start, end)
}

/// Full description of one stochastic run.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub mode: Mode,
    pub big_n: usize,
    pub beta: f64,
    pub h: f64,
    pub t_end: f64,
    pub u0: SpectralField,
    pub u1: SpectralField,
    /// Regularity label of the data and of the H^s norms recorded.
    pub s: f64,
    pub stream: NoiseStream,
    /// `false` sets Ψ_N ≡ 0 and σ_N ≡ 0 (deterministic sine–Gordon).
    pub noise: bool,
    pub epsilon: f64,
    pub blowup_factor: f64,
    /// Keep (v, Ψ) every this many steps (and at the end).
    pub snapshot_every: Option<usize>,
}

impl SolverConfig {
    /// Zero data on `grid` with defaults for everything but the physics.
    pub fn new(grid: &TorusGrid, mode: Mode, big_n: usize, beta: f64, h: f64, t_end: f64) -> Self {
        Self {
            mode,
            big_n,
            beta,
            h,
            t_end,
            u0: SpectralField::zeros(grid, true),
            u1: SpectralField::zeros(grid, true),
            s: 1.0,
            stream: NoiseStream::new(0, 0, 0),
            noise: true,
            epsilon: DEFAULT_EPSILON,
            blowup_factor: DEFAULT_BLOWUP_FACTOR,
            snapshot_every: None,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        self.u0.grid()
    }

    /// Number of steps; T must be a multiple of h.
    pub fn steps(&self) -> Result<usize> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {}", self.h)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!("end time must be >= 0, got {}", self.t_end)));
        }
        let k = (self.t_end / self.h).round();
        if (k * self.h - self.t_end).abs() > 1e-9 * self.t_end.max(self.h) {
            return Err(Error::InvalidParameter(format!(
                "end time {} is not a multiple of h = {}",
                self.t_end, self.h
            )));
        }
        Ok(k as usize)
    }

    /// Structural checks; returns advisory warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.steps()?;
        if self.big_n == 0 {
            return Err(Error::InvalidParameter("truncation N must be >= 1".into()));
        }
        self.grid().check_resolves(self.big_n)?;
        if self.u1.grid() != self.grid() {
            return Err(Error::InvalidGrid("u0 and u1 live on different grids".into()));
        }
        if !(self.epsilon >= 0.0) || !(self.blowup_factor > 1.0) {
            return Err(Error::InvalidParameter("need ε >= 0 and blow-up factor > 1".into()));
        }
        let mut warnings = Vec::new();
        let b2t = self.beta * self.beta * self.t_end;
        if self.mode == Mode::Renormalized && self.noise && b2t >= 8.0 * PI {
            warnings.push(format!("β²T = {b2t:.4} >= 8π: outside the regime where Θ_N converges"));
        }
        Ok(warnings)
    }
}

/// Norms recorded after every step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormRecord {
    pub t: f64,
    /// ‖v‖_{H^s}
    pub v_hs: f64,
    /// ‖∂ₜv‖_{H^{s−1}}
    pub vt_hs: f64,
    /// ‖v‖_{H^{−ε}}
    pub v_neg: f64,
    /// ‖u‖_{H^{−ε}} with u = Ψ + v
    pub u_neg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub state: WaveState,
    pub psi: SpectralField,
}

impl Snapshot {
    /// u_N = Ψ_N + v_N.
    pub fn u(&self) -> SpectralField {
        let mut u = self.state.v.clone();
        u.axpy(1.0, &self.psi);
        u
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<NormRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: WaveState,
    pub final_psi: SpectralField,
    /// (t, ‖v‖_{H^s}, limit) when the blow-up guard halted the run.
    pub halted: Option<(f64, f64, f64)>,
    pub clamped_modes: u64,
}

impl Trajectory {
    /// max_t ‖v(t)‖_{H^{−ε}}.
    pub fn sup_v_neg(&self) -> f64 {
        self.records.iter().map(|r| r.v_neg).fold(0.0, f64::max)
    }

    /// Error if the run was halted.
    pub fn check(&self) -> Result<()> {
        match self.halted {
            Some((t, norm, limit)) => Err(Error::BlowUp { t, norm, limit }),
            None => Ok(()),
        }
    }
}

/// View of one run handed to lockstep observers after each step.
pub struct LockstepView<'a> {
    pub state: &'a WaveState,
    pub psi: &'a SpectralField,
}

struct PsiGroup {
    big_n: usize,
    conv: ConvolutionState,
    sigma: SigmaTable,
    theta: ChaosField,
    psi: SpectralField,
}

impl PsiGroup {
    fn theta_now(
        conv: &ConvolutionState,
        sigma: &SigmaTable,
        beta: f64,
        noise: bool,
    ) -> Result<(ChaosField, SpectralField)> {
        let grid = conv.grid();
        let n = conv.truncation();
        if !noise {
            let zeros = vec![0.0; grid.len()];
            return Ok((theta_with_sigma(&zeros, conv.time(), beta, n, 0.0)?, SpectralField::zeros(grid, true)));
        }
        let psi_phys = conv.psi_field();
        Ok((
            theta_with_sigma(&psi_phys, conv.time(), beta, n, sigma.sigma(conv.time())?)?,
            conv.psi_spectral(),
        ))
    }
}

struct NormWeights {
    hs: SobolevWeights,
    hs1: SobolevWeights,
    neg: SobolevWeights,
}

impl NormWeights {
    fn new(grid: &TorusGrid, s: f64, epsilon: f64) -> Self {
        Self {
            hs: SobolevWeights::new(grid, s),
            hs1: SobolevWeights::new(grid, s - 1.0),
            neg: SobolevWeights::new(grid, -epsilon),
        }
    }

    fn record(&self, state: &WaveState, psi: &SpectralField) -> NormRecord {
        let mut u = state.v.clone();
        u.axpy(1.0, psi);
        NormRecord {
            t: state.t,
            v_hs: self.hs.norm(&state.v),
            vt_hs: self.hs1.norm(&state.vt),
            v_neg: self.neg.norm(&state.v),
            u_neg: self.neg.norm(&u),
        }
    }
}

/// Runs several configurations in lockstep. All runs share h, T, β, the
/// noise stream and the noise switch; runs with equal (N, grid) share one
/// Ψ_N path, and runs with different N see the same Brownian motions on
/// their common modes. `observer` sees every run after each step (and at
/// t = 0). Runs halted by the blow-up guard are frozen and flagged.
pub fn solve_lockstep(
    configs: &[SolverConfig],
    mut observer: impl FnMut(f64, &[LockstepView<'_>]),
) -> Result<Vec<Trajectory>> {
    let Some(first) = configs.first() else {
        return Ok(Vec::new());
    };
    for c in configs {
        for w in c.validate()? {
            log::warn!("{w}");
        }
        if c.h != first.h || c.t_end != first.t_end || c.beta != first.beta || c.stream != first.stream
            || c.noise != first.noise
        {
            return Err(Error::InvalidParameter(
                "lockstep runs must share h, T, β, stream and noise switch".into(),
            ));
        }
    }
    let steps = first.steps()?;
    let (beta, noise, h) = (first.beta, first.noise, first.h);

    let mut groups: Vec<PsiGroup> = Vec::new();
    let mut key_to_group: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut run_group = Vec::with_capacity(configs.len());
    for c in configs {
        let key = (c.big_n, c.grid().size());
        let gi = match key_to_group.get(&key) {
            Some(&gi) => gi,
            None => {
                let conv = ConvolutionState::new(c.grid(), c.big_n, c.stream)?;
                let sigma = SigmaTable::new(c.big_n, c.grid())?;
                let (theta, psi) = PsiGroup::theta_now(&conv, &sigma, beta, noise)?;
                groups.push(PsiGroup {
                    big_n: c.big_n,
                    conv,
                    sigma,
                    theta,
                    psi,
                });
                key_to_group.insert(key, groups.len() - 1);
                groups.len() - 1
            }
        };
        run_group.push(gi);
    }

    struct Run {
        stepper: Stepper,
        state: WaveState,
        limit: f64,
        weights: std::sync::Arc<NormWeights>,
        traj: Trajectory,
    }
    let mut weight_cache: BTreeMap<(usize, u64, u64), std::sync::Arc<NormWeights>> = BTreeMap::new();
    let mut runs: Vec<Run> = configs
        .iter()
        .zip(&run_group)
        .map(|(c, &gi)| {
            let state = WaveState::new(c.u0.clone(), c.u1.clone(), 0.0, c.s)?;
            let scale = state.data_norm(c.s).max(1.0);
            let psi = groups[gi].psi.clone();
            let weights = weight_cache
                .entry((c.grid().size(), c.s.to_bits(), c.epsilon.to_bits()))
                .or_insert_with(|| std::sync::Arc::new(NormWeights::new(c.grid(), c.s, c.epsilon)))
                .clone();
            let rec = weights.record(&state, &psi);
            let snapshots = if c.snapshot_every.is_some() {
                vec![Snapshot {
                    state: state.clone(),
                    psi: psi.clone(),
                }]
            } else {
                Vec::new()
            };
            Ok(Run {
                stepper: Stepper::new(c.grid(), c.mode, beta, h)?,
                limit: c.blowup_factor * scale,
                weights,
                traj: Trajectory {
                    records: vec![rec],
                    snapshots,
                    final_state: state.clone(),
                    final_psi: psi,
                    halted: None,
                    clamped_modes: 0,
                },
                state,
            })
        })
        .collect::<Result<_>>()?;
    {
        let views: Vec<LockstepView<'_>> = runs
            .iter()
            .zip(&run_group)
            .map(|(r, &gi)| LockstepView {
                state: &r.state,
                psi: &groups[gi].psi,
            })
            .collect();
        observer(0.0, &views);
    }

    for k in 0..steps {
        let previous: Vec<ChaosField> = groups.iter().map(|g| g.theta.clone()).collect();
        groups.par_iter_mut().try_for_each(|g| -> Result<()> {
            if noise {
                g.conv.advance(h)?;
            }
            let t_next = (k + 1) as f64 * h;
            let (theta, psi) = if noise {
                PsiGroup::theta_now(&g.conv, &g.sigma, beta, true)?
            } else {
                let zeros = vec![0.0; g.conv.grid().len()];
                (
                    theta_with_sigma(&zeros, t_next, beta, g.big_n, 0.0)?,
                    SpectralField::zeros(g.conv.grid(), true),
                )
            };
            g.theta = theta;
            g.psi = psi;
            Ok(())
        })?;
        let t_next = (k + 1) as f64 * h;
        runs.par_iter_mut()
            .zip(run_group.par_iter())
            .zip(configs.par_iter())
            .try_for_each(|((run, &gi), c)| -> Result<()> {
                if run.traj.halted.is_some() {
                    return Ok(());
                }
                let start = ForcingNode {
                    theta: Some(&previous[gi]),
                    extra: None,
                };
                let end = ForcingNode {
                    theta: Some(&groups[gi].theta),
                    extra: None,
                };
                let mut next = run.stepper.step(&run.state, &start, &end)?;
                next.t = t_next;
                let rec = run.weights.record(&next, &groups[gi].psi);
                run.traj.records.push(rec);
                if rec.v_hs > run.limit || !rec.v_hs.is_finite() {
                    log::warn!("blow-up guard: ‖v‖_H^s = {} > {} at t = {t_next}", rec.v_hs, run.limit);
                    run.traj.halted = Some((t_next, rec.v_hs, run.limit));
                }
                if let Some(every) = c.snapshot_every {
                    if (k + 1) % every.max(1) == 0 || k + 1 == steps || run.traj.halted.is_some() {
                        run.traj.snapshots.push(Snapshot {
                            state: next.clone(),
                            psi: groups[gi].psi.clone(),
                        });
                    }
                }
                run.state = next;
                Ok(())
            })?;
        let views: Vec<LockstepView<'_>> = runs
            .iter()
            .zip(&run_group)
            .map(|(r, &gi)| LockstepView {
                state: &r.state,
                psi: &groups[gi].psi,
            })
            .collect();
        observer(t_next, &views);
    }

    Ok(runs
        .into_iter()
        .zip(run_group)
        .map(|(mut r, gi)| {
            r.traj.final_state = r.state;
            r.traj.final_psi = groups[gi].psi.clone();
            r.traj.clamped_modes = groups[gi].conv.clamped_modes();
            r.traj
        })
        .collect())
}

/// Single run: samples Ψ_N and Θ_N at the step nodes and integrates v_N.
pub fn solve(config: &SolverConfig) -> Result<Trajectory> {
    Ok(solve_lockstep(std::slice::from_ref(config), |_, _| {})?
        .pop()
        .expect("one run"))
}

/// Data A·cos(x₁) with ‖u₀‖_{H^s} = `norm`, and u₁ = 0.
pub fn cosine_data(grid: &TorusGrid, s: f64, norm: f64) -> (SpectralField, SpectralField) {
    // ‖cos x₁‖_{H^s} = π√2 · 2^{s/2}
    let amp = norm / (PI * 2f64.sqrt() * 2f64.powf(s / 2.0));
    let values: Vec<f64> = (0..grid.len()).map(|i| amp * grid.point(i)[0].cos()).collect();
    let u0 = forward_transform(grid, &values).expect("finite");
    (u0, SpectralField::zeros(grid, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renorm::sigma_exact;

    fn cos_state(grid: &TorusGrid) -> WaveState {
        let values: Vec<f64> = (0..grid.len()).map(|i| grid.point(i)[0].cos()).collect();
        WaveState::new(
            forward_transform(grid, &values).unwrap(),
            SpectralField::zeros(grid, true),
            0.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn single_mode_closed_form() {
        let g = TorusGrid::new(16).unwrap();
        let s0 = cos_state(&g);
        for t in [0.3, 1.0, 2.7] {
            let st = linear_propagate(&s0, t).unwrap();
            let v = st.v_field().unwrap();
            let exact = (t * 2f64.sqrt()).cos();
            for (i, x) in v.iter().enumerate() {
                assert!((x - exact * g.point(i)[0].cos()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn energy_and_reversibility() {
        let g = TorusGrid::new(16).unwrap();
        let mut rng_vals = Vec::new();
        for i in 0..g.len() {
            let p = g.point(i);
            rng_vals.push((p[0] + 2.0 * p[1]).sin() + 0.3 * (3.0 * p[0]).cos() * p[1].sin());
        }
        let v = forward_transform(&g, &rng_vals).unwrap();
        let vt = v.apply_multiplier(|n| 1.0 / bracket(n));
        let st = WaveState::new(v, vt, 0.0, 1.0).unwrap();
        let e0 = st.energy();
        let fwd = linear_propagate(&st, 0.77).unwrap();
        assert!((fwd.energy() - e0).abs() <= 1e-10 * e0);
        let back = linear_propagate(&fwd, -0.77).unwrap();
        for (a, b) in back.v.coeffs().iter().zip(st.v.coeffs()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn zero_forcing_is_linear_flow() {
        let g = TorusGrid::new(12).unwrap();
        let st = cos_state(&g);
        let none = ForcingNode::default();
        let a = duhamel_step(&st, Mode::Renormalized, 1.0, &none, &none, 0.1).unwrap();
        let b = linear_propagate(&st, 0.1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_everything_stays_zero() {
        let g = TorusGrid::resolving(8);
        let mut c = SolverConfig::new(&g, Mode::Renormalized, 8, 0.0, 0.05, 0.5);
        c.noise = false;
        let traj = solve(&c).unwrap();
        assert!(traj.final_state.v.coeffs().iter().all(|z| z.norm() == 0.0));
        assert!(traj.records.iter().all(|r| r.u_neg == 0.0));
    }

    #[test]
    fn linear_mode_is_free_flow_plus_psi() {
        let g = TorusGrid::resolving(8);
        let (u0, u1) = cosine_data(&g, 1.0, 1.0);
        let mut c = SolverConfig::new(&g, Mode::Linear, 8, 1.5, 0.05, 0.5);
        c.u0 = u0.clone();
        c.u1 = u1.clone();
        c.stream = NoiseStream::new(3, 4, 5);
        c.snapshot_every = Some(10);
        let traj = solve(&c).unwrap();
        let free = linear_propagate(&WaveState::new(u0, u1, 0.0, 1.0).unwrap(), 0.5).unwrap();
        let snap = traj.snapshots.last().unwrap();
        let mut expected = free.v.clone();
        let mut conv = ConvolutionState::new(&g, 8, c.stream).unwrap();
        for _ in 0..10 {
            conv.advance(0.05).unwrap();
        }
        expected.axpy(1.0, &conv.psi_spectral());
        let diff = snap.u().sub(&expected);
        assert!(sobolev_norm(&diff, 0.0) < 1e-12);
    }

    #[test]
    fn mode_consistency_is_bitwise() {
        let g = TorusGrid::resolving(16);
        let beta = PI.sqrt();
        let h = 0.02;
        let mut conv = ConvolutionState::new(&g, 16, NoiseStream::new(1, 2, 3)).unwrap();
        let (u0, u1) = cosine_data(&g, 1.0, 1.0);
        let mut thetas = Vec::new();
        for k in 0..=10 {
            if k > 0 {
                conv.advance(h).unwrap();
            }
            let sigma = sigma_exact(conv.time(), 16, &g).unwrap();
            thetas.push(theta_with_sigma(&conv.psi_field(), conv.time(), beta, 16, sigma).unwrap());
        }
        let unit: Vec<ChaosField> = thetas.iter().map(|t| t.with_log_gamma(0.0)).collect();
        let ren = Stepper::new(&g, Mode::Renormalized, beta, h).unwrap();
        let unr = Stepper::new(&g, Mode::Unrenormalized, beta, h).unwrap();
        let mut a = WaveState::new(u0.clone(), u1.clone(), 0.0, 1.0).unwrap();
        let mut b = a.clone();
        for k in 0..10 {
            let node = |th: &[ChaosField], j: usize| -> ChaosField { th[j].clone() };
            let (s0, s1) = (node(&unit, k), node(&unit, k + 1));
            a = ren
                .step(&a, &ForcingNode { theta: Some(&s0), extra: None }, &ForcingNode { theta: Some(&s1), extra: None })
                .unwrap();
            b = unr
                .step(
                    &b,
                    &ForcingNode { theta: Some(&thetas[k]), extra: None },
                    &ForcingNode { theta: Some(&thetas[k + 1]), extra: None },
                )
                .unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn unrenormalized_forcing_is_damped() {
        let g = TorusGrid::resolving(64);
        let mut conv = ConvolutionState::new(&g, 64, NoiseStream::new(5, 0, 0)).unwrap();
        conv.advance(0.5).unwrap();
        let sigma = sigma_exact(0.5, 64, &g).unwrap();
        let theta = theta_with_sigma(&conv.psi_field(), 0.5, 2.0, 64, sigma).unwrap();
        assert!(theta.gamma().inverse() <= 1.0);
        let v = vec![0.3; g.len()];
        let un = nonlinearity(Mode::Unrenormalized, 2.0, &theta, &v).unwrap();
        let re = nonlinearity(Mode::Renormalized, 2.0, &theta, &v).unwrap();
        for (a, b) in un.iter().zip(&re) {
            assert!((a * theta.gamma().value() - b).abs() <= 1e-12 * b.abs().max(1.0));
            assert!(a.abs() <= 1.0);
        }
    }

    #[test]
    fn lipschitz_in_data() {
        let g = TorusGrid::resolving(16);
        let (u0, u1) = cosine_data(&g, 1.0, 1.0);
        let mut c = SolverConfig::new(&g, Mode::Renormalized, 16, PI.sqrt(), 0.01, 0.1);
        c.u0 = u0.clone();
        c.u1 = u1;
        c.stream = NoiseStream::new(9, 0, 0);
        let base = solve(&c).unwrap().final_state;
        let mut ratios = Vec::new();
        for delta in [1e-2, 1e-3, 1e-4] {
            let mut p = c.clone();
            let (d0, _) = cosine_data(&g, 1.0, delta);
            p.u0.axpy(1.0, &d0.apply_multiplier(|n| if n == [1, 0] || n == [-1, 0] { 1.0 } else { 0.0 }));
            let dist = sobolev_norm(&p.u0.sub(&c.u0), 1.0);
            let pert = solve(&p).unwrap().final_state;
            ratios.push(pert.difference(&base).data_norm(1.0) / dist);
        }
        // locally Lipschitz with a constant close to the free flow's
        for r in &ratios {
            assert!(*r < 2.0, "{ratios:?}");
        }
        assert!((ratios[1] - ratios[2]).abs() < 0.05 * ratios[2]);
    }

    #[test]
    fn grid_refinement_changes_little() {
        // aliasing of the non-band-limited nonlinearity: M vs 2M
        let n = 16;
        let coarse = TorusGrid::resolving(n);
        let fine = TorusGrid::new(2 * coarse.size()).unwrap();
        let run = |g: &TorusGrid| {
            let (u0, u1) = cosine_data(g, 1.0, 1.0);
            let mut c = SolverConfig::new(g, Mode::Renormalized, n, PI.sqrt(), 0.01, 0.2);
            c.u0 = u0;
            c.u1 = u1;
            c.stream = NoiseStream::new(21, 0, 0);
            solve(&c).unwrap().final_state
        };
        let (a, b) = (run(&coarse), run(&fine));
        let mut diff = 0.0;
        let mut total = 0.0;
        for i in 0..coarse.len() {
            let k = coarse.frequency(i);
            let j = fine.index_of(k).unwrap();
            diff += (a.v.coeffs()[i] - b.v.coeffs()[j]).norm_sqr() / bracket(k).powf(0.2);
            total += b.v.coeffs()[j].norm_sqr() / bracket(k).powf(0.2);
        }
        let rel = (diff / total).sqrt();
        assert!(rel < 1e-2, "relative H^-0.1 change {rel}");
    }

    #[test]
    fn blow_up_guard_halts() {
        // β² = 400 makes γ_N(t) astronomically large within a few steps
        let g = TorusGrid::resolving(16);
        let mut c = SolverConfig::new(&g, Mode::Renormalized, 16, 20.0, 0.05, 1.0);
        c.stream = NoiseStream::new(1, 1, 1);
        let traj = solve(&c).unwrap();
        assert!(traj.halted.is_some());
        assert!(matches!(traj.check(), Err(Error::BlowUp { .. })));
    }

    #[test]
    fn config_checks() {
        let g = TorusGrid::resolving(8);
        let c = SolverConfig::new(&g, Mode::Renormalized, 8, 1.0, 0.03, 0.1);
        assert!(c.steps().is_err());
        let c = SolverConfig::new(&g, Mode::Renormalized, 64, 1.0, 0.05, 0.1);
        assert!(c.validate().is_err());
        let c = SolverConfig::new(&g, Mode::Renormalized, 8, 6.0, 0.05, 1.0);
        assert_eq!(c.validate().unwrap().len(), 1);
    }
}
