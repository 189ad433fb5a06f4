//! Bare and dressed resolvents of a free band, and a short energy sweep.

use num_complex::Complex64;
use polar_scf::quasiparticle::{
    dyson_solve_on, green0, momentum_grid, resolvent_sweep_on, CMatrix, CVector, SelfEnergyModel,
};

fn main() -> polar_scf::Result<()> {
    let k = momentum_grid(33, 2.0)?;
    let h = CMatrix::from_diagonal(&CVector::from_iterator(
        k.len(),
        k.iter().map(|&x| Complex64::new(x * x / 2.0, 0.0)),
    ));
    let sigma = SelfEnergyModel::DiagonalPolynomial { coeffs: vec![-0.05, 0.0, 0.1] };

    let g0 = green0(&h, 0.4, 0.02)?;
    let g = dyson_solve_on(&g0, &sigma, &k)?;
    println!("E = 0.4: Im Sp G0 = {:.4}, Im Sp G = {:.4}", g0.matrix.trace().im, g.matrix.trace().im);
    println!("|G^-1 G - 1| = {:.1e}", g.identity_residual());

    let energies: Vec<f64> = (0..9).map(|i| -0.2 + 0.3 * i as f64).collect();
    for row in resolvent_sweep_on(&h, &sigma, &k, &energies, 0.05)? {
        println!("E = {:5.2}  Im Sp G = {:9.3}  poles nearby: {}", row.energy, row.trace_imag_g, row.pole_estimates.len());
    }
    Ok(())
}
