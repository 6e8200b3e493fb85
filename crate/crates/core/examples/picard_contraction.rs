//! Strichartz pairs and Picard iteration of the Duhamel map for v_N.

use std::f64::consts::PI;

use sgwave::noise::NoiseStream;
use sgwave::solver::{cosine_data, picard_iterate, strichartz_pairs, InitialGuess, Mode, SolverConfig};
use sgwave::spectral::TorusGrid;

fn main() -> sgwave::Result<()> {
    for s in [0.1, 0.5, 0.9] {
        let p = strichartz_pairs(s)?;
        println!("s = {s}: {:?}, admissible {}", p.summary(), p.is_admissible());
    }

    let n = 32;
    let g = TorusGrid::resolving(n);
    let (u0, u1) = cosine_data(&g, 0.5, 1.0);
    for t_end in [0.1, 0.05] {
        let mut c = SolverConfig::new(&g, Mode::Renormalized, n, PI.sqrt(), 0.005, t_end);
        c.u0 = u0.clone();
        c.u1 = u1.clone();
        c.s = 0.5;
        c.stream = NoiseStream::new(0, 0, 0);
        let rep = picard_iterate(&c, InitialGuess::Zero, 6)?;
        let d: Vec<String> = rep.differences.iter().map(|x| format!("{x:.3e}")).collect();
        println!("T = {t_end}: differences [{}]", d.join(", "));
        println!("         factors {:.4?}", rep.factors);
    }
    Ok(())
}
