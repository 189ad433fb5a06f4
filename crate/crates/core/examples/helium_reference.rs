//! Regenerates `tests/fixtures/helium_reference.json`: helium on a mesh four
//! times finer than the default.
//!
//!     cargo run --release --example helium_reference > tests/fixtures/helium_reference.json

use polar_scf::hfcore::{scf_solve, AtomConfig, Shell};
use polar_scf::radial::DEFAULT_POINTS;
use polar_scf::shell::to_json;
use serde::Serialize;

#[derive(Serialize)]
struct Reference {
    z: f64,
    shells: String,
    points: usize,
    r_max: f64,
    iterations: usize,
    eigenvalue_1s_hartree: f64,
    total_energy_hartree: f64,
}

fn main() -> polar_scf::Result<()> {
    let mut cfg = AtomConfig::new(2.0, vec![Shell::new(1, 0, 2.0)])?;
    cfg.grid.points = 4 * DEFAULT_POINTS;
    let st = scf_solve(&cfg)?;
    let r = Reference {
        z: cfg.z,
        shells: polar_scf::hfcore::format_shells(&cfg.shells),
        points: cfg.grid.points,
        r_max: cfg.grid.r_max,
        iterations: st.iterations,
        eigenvalue_1s_hartree: st.eigenvalues[0],
        total_energy_hartree: st.total_energy,
    };
    print!("{}", to_json(&r)?);
    Ok(())
}
