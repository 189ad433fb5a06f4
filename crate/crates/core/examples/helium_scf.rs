//! Closed-shell helium and open-shell lithium on the default mesh.

use polar_scf::hfcore::{scf_solve, trace_energy, AtomConfig, Shell};

fn main() -> polar_scf::Result<()> {
    for (z, shells) in [
        (2.0, vec![Shell::new(1, 0, 2.0)]),
        (3.0, vec![Shell::new(1, 0, 2.0), Shell::new(2, 0, 1.0)]),
    ] {
        let cfg = AtomConfig::new(z, shells)?;
        let t = std::time::Instant::now();
        let st = scf_solve(&cfg)?;
        let tr = trace_energy(&st)?;
        println!(
            "Z={z}: E = {:.8} after {} iterations ({:.2?})",
            st.total_energy,
            st.iterations,
            t.elapsed()
        );
        for (o, e) in st.orbitals.iter().zip(&st.eigenvalues) {
            println!("  eps_{} = {e:.8}", o.label());
        }
        println!("  virial T/V = {:.6}", st.virial_ratio()?);
        println!("  trace offset = {:.3e}", tr.offset());
    }
    Ok(())
}
