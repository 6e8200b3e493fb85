//! Picard iteration of the discrete Duhamel map and the X^s(T) proxy norm.

use num_complex::Complex64;
use rayon::prelude::*;

use super::strichartz::{strichartz_pairs, StrichartzPair};
use super::{linear_propagate, ForcingNode, SolverConfig, Stepper, WaveState};
use crate::chaos::trapezoid;
use crate::renorm::{theta_with_sigma, ChaosField, SigmaTable};
use crate::spectral::{lp_norm, sobolev_norm, SpectralField};
use crate::stoch_conv::ConvolutionState;
use crate::{Error, Result};

const TIME_TOL: f64 = 1e-9;

/// max_t ‖v‖_{H^s} + max_t ‖∂ₜv‖_{H^{s−1}} + ‖v‖_{L^q([0,T]; L^r)}, over the
/// nodes of `trajectory` in [0, T]. The time integral is trapezoidal; q = ∞
/// becomes a maximum.
pub fn xs_norm(trajectory: &[WaveState], s: f64, t_end: f64, pair: &StrichartzPair) -> Result<f64> {
    let Some(first) = trajectory.first() else {
        return Err(Error::InvalidParameter("empty trajectory".into()));
    };
    let last = trajectory.last().expect("non-empty");
    if first.t.abs() > TIME_TOL || last.t < t_end - TIME_TOL {
        return Err(Error::InvalidParameter(format!(
            "trajectory covers [{}, {}], not [0, {t_end}]",
            first.t, last.t
        )));
    }
    let nodes: Vec<&WaveState> = trajectory.iter().filter(|st| st.t <= t_end + TIME_TOL).collect();
    let r = pair.r();
    let mut sup_v: f64 = 0.0;
    let mut sup_vt: f64 = 0.0;
    let mut times = Vec::with_capacity(nodes.len());
    let mut lr = Vec::with_capacity(nodes.len());
    for st in &nodes {
        sup_v = sup_v.max(sobolev_norm(&st.v, s));
        sup_vt = sup_vt.max(sobolev_norm(&st.vt, s - 1.0));
        times.push(st.t);
        lr.push(lp_norm(st.grid(), &st.v_field()?, r));
    }
    let q = pair.q();
    let strichartz = if q.is_infinite() {
        lr.iter().cloned().fold(0.0, f64::max)
    } else {
        let powered: Vec<f64> = lr.iter().map(|x| x.powf(q)).collect();
        trapezoid(&times, &powered).powf(1.0 / q)
    };
    Ok(sup_v + sup_vt + strichartz)
}

/// Starting trajectory for [`picard_iterate`].
#[derive(Debug, Clone)]
pub enum InitialGuess {
    /// v ≡ 0.
    Zero,
    /// The free Klein–Gordon evolution of the data.
    FreeFlow,
    /// Explicit states at the step nodes 0, h, …, T.
    Trajectory(Vec<WaveState>),
}

#[derive(Debug, Clone)]
pub struct PicardReport {
    pub pair: StrichartzPair,
    /// ‖Φ(Vʲ) − Vʲ‖ in the X^s proxy, j = 0, 1, …
    pub differences: Vec<f64>,
    /// differences[j] / differences[j − 1].
    pub factors: Vec<f64>,
    /// Three consecutive factors above 1.
    pub non_contraction: bool,
    /// Last iterate.
    pub iterate: Vec<WaveState>,
}

impl PicardReport {
    pub fn max_factor(&self) -> f64 {
        self.factors.iter().cloned().fold(0.0, f64::max)
    }
}

/// Θ_N at the step nodes of `config`.
pub(crate) fn theta_nodes(config: &SolverConfig) -> Result<Vec<ChaosField>> {
    let steps = config.steps()?;
    let grid = config.grid();
    let n = config.big_n;
    let mut conv = ConvolutionState::new(grid, n, config.stream)?;
    let table = SigmaTable::new(n, grid)?;
    let mut out = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        if k > 0 && config.noise {
            conv.advance(config.h)?;
        }
        let t = k as f64 * config.h;
        if config.noise {
            let sigma = table.sigma(t)?;
            out.push(theta_with_sigma(&conv.psi_field(), t, config.beta, n, sigma)?);
        } else {
            out.push(theta_with_sigma(&vec![0.0; grid.len()], t, config.beta, n, 0.0)?);
        }
    }
    Ok(out)
}

/// Discrete Duhamel map: trapezoidal quadrature with the forcing evaluated
/// on `guess`.
fn duhamel_map(
    stepper: &Stepper,
    data: &WaveState,
    thetas: &[ChaosField],
    guess: &[WaveState],
) -> Result<Vec<WaveState>> {
    let grid = data.grid();
    let h = stepper.h();
    let forcing: Vec<Option<Vec<Complex64>>> = guess
        .par_iter()
        .zip(thetas.par_iter())
        .map(|(g, th)| {
            stepper.forcing(
                &ForcingNode {
                    theta: Some(th),
                    extra: None,
                },
                &g.v,
            )
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(guess.len());
    out.push(data.clone());
    let mut a = data.v.coeffs().to_vec();
    let mut b = data.vt.coeffs().to_vec();
    for k in 0..guess.len() - 1 {
        if let Some(g) = &forcing[k] {
            b.iter_mut().zip(g).for_each(|(y, f)| *y += f * (0.5 * h));
        }
        stepper.propagator().apply(&mut a, &mut b);
        if let Some(g) = &forcing[k + 1] {
            b.iter_mut().zip(g).for_each(|(y, f)| *y += f * (0.5 * h));
        }
        out.push(WaveState {
            v: SpectralField::from_coeffs(grid, a.clone(), true)?,
            vt: SpectralField::from_coeffs(grid, b.clone(), true)?,
            t: (k + 1) as f64 * h,
            s: data.s,
        });
    }
    Ok(out)
}

fn trajectory_difference(a: &[WaveState], b: &[WaveState]) -> Vec<WaveState> {
    a.iter().zip(b).map(|(x, y)| x.difference(y)).collect()
}

/// Fixed-point iteration Vʲ⁺¹ = Φ^N(Vʲ) on the step nodes of `config`, with
/// the Θ_N path sampled once from `config.stream`. Stops early after three
/// consecutive factors above 1 or when an update vanishes exactly.
pub fn picard_iterate(config: &SolverConfig, guess: InitialGuess, iterations: usize) -> Result<PicardReport> {
    if iterations < 2 {
        return Err(Error::InvalidParameter("Picard iteration needs >= 2 iterations".into()));
    }
    for w in config.validate()? {
        log::warn!("{w}");
    }
    let pair = strichartz_pairs(config.s)?;
    let steps = config.steps()?;
    let grid = config.grid();
    let data = WaveState::new(config.u0.clone(), config.u1.clone(), 0.0, config.s)?;
    let mut current = match guess {
        InitialGuess::Zero => (0..=steps)
            .map(|k| WaveState {
                t: k as f64 * config.h,
                ..WaveState::zeros(grid, config.s)
            })
            .collect(),
        InitialGuess::FreeFlow => (0..=steps)
            .map(|k| linear_propagate(&data, k as f64 * config.h))
            .collect::<Result<Vec<_>>>()?,
        InitialGuess::Trajectory(states) => {
            if states.len() != steps + 1 || states.iter().any(|s| s.grid() != grid) {
                return Err(Error::InvalidParameter(format!(
                    "initial guess needs {} states on the config grid",
                    steps + 1
                )));
            }
            states
        }
    };
    let thetas = theta_nodes(config)?;
    let stepper = Stepper::new(grid, config.mode, config.beta, config.h)?;
    let mut differences = Vec::new();
    let mut factors = Vec::new();
    let mut above = 0;
    let mut non_contraction = false;
    for _ in 0..iterations {
        let next = duhamel_map(&stepper, &data, &thetas, &current)?;
        let d = xs_norm(&trajectory_difference(&next, &current), config.s, config.t_end, &pair)?;
        if let Some(&prev) = differences.last() {
            let f: f64 = d / prev;
            factors.push(f);
            above = if f > 1.0 { above + 1 } else { 0 };
        }
        differences.push(d);
        current = next;
        if above >= 3 {
            non_contraction = true;
            log::warn!("Picard iteration not contracting: factors {factors:?}");
            break;
        }
        if d == 0.0 {
            break;
        }
    }
    Ok(PicardReport {
        pair,
        differences,
        factors,
        non_contraction,
        iterate: current,
    })
}
