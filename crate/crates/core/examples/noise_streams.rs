//! Counter-keyed noise: every draw is a pure function of
//! (seed, experiment, sample, step, mode), independent of N and the grid.

use sgwave::noise::{sample_increment, NoiseStream};
use sgwave::spectral::TorusGrid;

fn main() -> sgwave::Result<()> {
    let stream = NoiseStream::new(42, 0, 7);
    let key = stream.step(3);
    println!("normals of mode (2, -1): {:?}", key.mode_normals([2, -1]));

    // the same Brownian increment of mode (1, 2) seen from two grid sizes
    let h = 0.01;
    for m in [16, 64] {
        let g = TorusGrid::new(m)?;
        let inc = sample_increment(&g, h, &key)?;
        let idx = g.index_of([1, 2]).expect("on grid");
        let mirror = g.index_of([-1, -2]).expect("on grid");
        println!(
            "M = {m:>2}: dB_(1,2) = {:.6}, dB_(-1,-2) = {:.6}",
            inc.values.coeffs()[idx],
            inc.values.coeffs()[mirror]
        );
    }

    let other = stream.with_sample(8).step(3);
    println!("next sample, same mode:  {:?}", other.mode_normals([2, -1]));
    Ok(())
}
