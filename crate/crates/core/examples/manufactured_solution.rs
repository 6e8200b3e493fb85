//! Time-step convergence of the exponential integrator on a manufactured
//! solution, and the closed-form single-mode check.

use sgwave::solver::{manufactured_convergence, single_mode_error};
use sgwave::spectral::TorusGrid;

fn main() -> sgwave::Result<()> {
    let g = TorusGrid::new(32)?;
    let rep = manufactured_convergence(&g, 1.0, 1.0, &[0.1, 0.05, 0.025, 0.0125, 0.00625])?;
    for (i, (h, e)) in rep.hs.iter().zip(&rep.errors).enumerate() {
        match i {
            0 => println!("h = {h:<8} error {e:.3e}"),
            _ => println!("h = {h:<8} error {e:.3e}  ratio {:.3}  order {:.3}", rep.ratios[i - 1], rep.orders[i - 1]),
        }
    }
    for n in [[1, 0], [2, 1], [5, 3]] {
        println!("single mode {n:?}: max error {:.2e}", single_mode_error(&g, n, 1.0, 0.01)?);
    }
    Ok(())
}
