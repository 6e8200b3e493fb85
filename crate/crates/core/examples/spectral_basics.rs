//! Fourier transforms, the smooth projector P_N and Sobolev norms on a grid.

use sgwave::spectral::{
    apply_bessel, chi, forward_transform, inverse_transform, project, sobolev_norm, TorusGrid,
};

fn main() -> sgwave::Result<()> {
    let g = TorusGrid::new(64)?;
    // f(x) = cos(3x₁) + 0.5 sin(20x₁ + 7x₂)
    let values: Vec<f64> = (0..g.len())
        .map(|i| {
            let [x1, x2] = g.point(i);
            (3.0 * x1).cos() + 0.5 * (20.0 * x1 + 7.0 * x2).sin()
        })
        .collect();
    let f = forward_transform(&g, &values)?;
    println!("coefficient at (3, 0): {:.6}", f.coeff([3, 0]));
    println!("hermitian defect: {:.2e}", f.hermitian_defect());

    let back = inverse_transform(&f)?;
    let err = values.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("round trip error: {err:.2e}");

    for s in [-1.0, 0.0, 1.0] {
        println!("‖f‖_H^{s:+} = {:.6}", sobolev_norm(&f, s));
    }
    println!("‖⟨∇⟩f‖_L² = {:.6}", sobolev_norm(&apply_bessel(&f, 1.0), 0.0));

    for n in [8, 32, 64] {
        let p = project(&f, n)?;
        println!(
            "N = {n:>2}: χ(3,0) = {:.3}, χ(20,7) = {:.3}, ‖P_N f‖_L² = {:.6}",
            chi([3, 0], n),
            chi([20, 7], n),
            sobolev_norm(&p, 0.0)
        );
    }
    Ok(())
}
