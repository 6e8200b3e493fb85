//! Unrenormalized runs collapse onto the linear flow as N grows; renormalized
//! runs driven by one noise path converge in N.

use sgwave::solver::{coupled_convergence, triviality_experiment, TrivialityConfig};

fn main() -> sgwave::Result<()> {
    let cfg = TrivialityConfig {
        ns: vec![16, 32, 64, 128],
        realizations: 2,
        ..TrivialityConfig::default()
    };
    let rep = triviality_experiment(&cfg)?;
    for row in &rep.rows {
        println!("N = {:>3}: e(N) = {:.5} ± {:.5}", row.big_n, row.error.mean, row.error.se);
    }
    println!("fit against 1/log N: R² = {:.3}", rep.fit.r_squared);

    let coupled = coupled_convergence(&TrivialityConfig {
        ns: vec![16, 32, 64],
        t_end: 0.1,
        h: 0.01,
        realizations: 2,
        ..TrivialityConfig::default()
    })?;
    for (r, d) in coupled.diffs.iter().enumerate() {
        let d: Vec<String> = d.iter().map(|x| format!("{x:.3e}")).collect();
        println!("realization {r}: ‖v_2N − v_N‖ = [{}]", d.join(", "));
    }
    Ok(())
}
