//! Permutation parity, antisymmetrized tensors, ladder operators and hole
//! creation on small Fock spaces.

use num_complex::Complex64;
use polar_scf::fockspace::{
    anticommutator_table, antisymmetrize, cyclic_residual, hole_create, hole_reference_state, Permutation, Tensor,
};

fn main() -> polar_scf::Result<()> {
    let p = Permutation::from_one_based(&[2, 3, 1])?;
    let q = Permutation::from_one_based(&[2, 1, 3])?;
    println!("parity of (2 3 1) = {}, of (2 1 3) = {}", p.parity(), q.parity());
    println!("parity of the product = {}", p.compose(&q)?.parity());

    // Two orbitals a, b in three dimensions: ψ(x1, x2) = a(x1) b(x2) - a(x2) b(x1), normalized.
    let c = |x: f64| Complex64::new(x, 0.0);
    let a = vec![c(1.0), c(0.0), c(0.0)];
    let b = vec![c(0.0), c(0.6), c(0.8)];
    let det = antisymmetrize(&Tensor::product(&[a, b])?)?;
    println!("two-electron determinant: norm {:.6}, psi(1,2) = {}", det.tensor().norm(), det.tensor().get(&[0, 1]));
    println!("cyclic residual = {:e}", cyclic_residual(&det, 1)?);

    for m in [2, 4, 6] {
        let t = anticommutator_table(m)?;
        println!("M = {m}: largest anticommutator entry {:e}, exact: {}", t.max_entry().abs(), t.is_exact());
    }

    let reference = hole_reference_state(3, 1)?;
    let hole = hole_create(&reference, 3, 1)?;
    println!(
        "hole on the 4-electron reference: populations {:?} -> {:?}, norm {}",
        reference.populations(),
        hole.populations(),
        hole.norm()
    );
    Ok(())
}
