//! Frozen-core pseudopotential for the lithium 2s electron.

use polar_scf::hfcore::{scf_solve, AtomConfig, Shell};
use polar_scf::pseudopot::{frozen_atom_shift, pk_solve};

fn main() -> polar_scf::Result<()> {
    let cfg = AtomConfig::new(3.0, vec![Shell::new(1, 0, 2.0), Shell::new(2, 0, 1.0)])?;
    let st = scf_solve(&cfg)?;
    let pk = pk_solve(&st, (2, 0))?;
    println!("all-electron eps_2s = {:.10}", pk.eigenvalue_allelectron);
    println!("pseudo eps_2s       = {:.10}", pk.eigenvalue);
    println!("difference          = {:.3e}", pk.eigenvalue - pk.eigenvalue_allelectron);
    println!(
        "nodes: all-electron {} -> pseudo {} (core radius {:.4} bohr)",
        pk.allelectron_node_count, pk.node_count, pk.core_radius
    );
    for c in &pk.core_coefficients {
        println!("a_{} = {:.8}", c.core, c.coefficient);
    }
    println!("\nfrozen-atom shifts for the 1s hole:");
    for s in frozen_atom_shift(&st, 0)? {
        println!("  {:>3}: {:+.8} hartree", s.level, s.shift_hartree);
    }
    Ok(())
}
