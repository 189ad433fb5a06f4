//! Hydrogenic orbitals on the logarithmic mesh and their discrete energies.

use polar_scf::radial::{default_grid, hydrogenic_orbital, kinetic_apply, nuclear_potential};

fn main() -> polar_scf::Result<()> {
    let z = 1.0;
    let g = default_grid(z)?;
    println!("{} points from {:.1e} to {} bohr, h = {:.5}", g.len(), g.r_min(), g.r_max(), g.log_step());
    let v = nuclear_potential(z, &g);
    for (n, l) in [(1, 0), (2, 0), (2, 1), (3, 2)] {
        let o = hydrogenic_orbital(z, n, l, &g)?;
        let t = kinetic_apply(&o, &g)?;
        let hu: Vec<f64> = t.iter().zip(&v).zip(&o.u).map(|((t, v), u)| t + v * u).collect();
        let e = g.inner(&o.u, &hu);
        println!(
            "{}: <H> = {e:.7}  (exact {:.7}), norm {:.9}, nodes {}",
            o.label(),
            -z * z / (2.0 * (n * n) as f64),
            g.inner(&o.u, &o.u),
            o.node_count()
        );
    }
    Ok(())
}
