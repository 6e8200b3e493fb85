//! Charge-cancellation: interaction products against the dipole bound.

use sgwave::chaos::{cancellation_ratio_scan, dipole_bound, interaction_product, ChargedPointSet};

fn main() -> sgwave::Result<()> {
    let set = ChargedPointSet::new(vec![[0.1, 0.2], [0.15, 0.2], [3.0, 3.0], [3.0, 3.3]])?;
    let bound = dipole_bound(&set, 1.0, 100.0)?;
    println!(
        "p = {}, product {:.5}, bound {:.5}, maximizing pairing {:?}",
        set.p(),
        interaction_product(&set, 1.0, 100.0).exp(),
        bound.ln_value.exp(),
        bound.pairing
    );

    for p in 1..=3 {
        for row in cancellation_ratio_scan(p, &[1.0], &[1.0, 10.0, 100.0, 1000.0], 200, 0)? {
            println!("p = {}, λ = {}, N = {:>6}: max ratio {:.4}", row.p, row.lambda, row.big_n, row.max_ratio);
        }
    }
    Ok(())
}
