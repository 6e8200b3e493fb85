//! One renormalized run of the truncated equation, split as u = Ψ_N + v_N.

use std::f64::consts::PI;

use sgwave::noise::NoiseStream;
use sgwave::solver::{cosine_data, solve, Mode, SolverConfig};
use sgwave::spectral::TorusGrid;

fn main() -> sgwave::Result<()> {
    let n = 32;
    let g = TorusGrid::resolving(n);
    let (u0, u1) = cosine_data(&g, 0.5, 1.0);
    for mode in [Mode::Renormalized, Mode::Unrenormalized, Mode::Linear] {
        let mut c = SolverConfig::new(&g, mode, n, PI.sqrt(), 0.01, 0.5);
        c.u0 = u0.clone();
        c.u1 = u1.clone();
        c.s = 0.5;
        c.stream = NoiseStream::new(0, 0, 0);
        for w in c.validate()? {
            println!("warning: {w}");
        }
        let traj = solve(&c)?;
        let last = traj.records.last().expect("recorded");
        println!(
            "{mode:?}: t = {:.2}, ‖v‖_H^s = {:.5}, ‖∂ₜv‖ = {:.5}, ‖u‖_H^-ε = {:.5}, halted {}",
            last.t,
            last.v_hs,
            last.vt_hs,
            last.u_neg,
            traj.halted.is_some()
        );
    }
    Ok(())
}
