//! Mass operator of a model self-energy and the resulting pair gap.

use polar_scf::quasiparticle::{mass_operator_eigen, momentum_grid, pair_quantities, SelfEnergyModel};

fn main() -> polar_scf::Result<()> {
    let k = momentum_grid(129, 2.0)?;
    for (name, sigma) in [
        ("weak", SelfEnergyModel::DiagonalPolynomial { coeffs: vec![-2e-4, 0.0, 0.3] }),
        ("strong", SelfEnergyModel::DiagonalPolynomial { coeffs: vec![-1.5, 0.0, 0.3] }),
        ("tilted", SelfEnergyModel::DiagonalPolynomial { coeffs: vec![-0.2, 0.05, 0.3] }),
    ] {
        let m = mass_operator_eigen(&sigma, &k)?;
        let p = pair_quantities(m.delta_m0, -0.5, 1, 0.0)?;
        println!(
            "{name:>6}: dM(0) = {:+.4e}, curvature {:+.3}, asymmetry {:.2e}, eps+ = {:+.4}, eps- = {:+.4}, gap = {:+.4e}, {:?}",
            m.delta_m0, m.curvature, m.asymmetry, p.eps_plus, p.eps_minus, p.gap, p.regime
        );
    }
    Ok(())
}
