//! Energy series of a charged vector boson and its departure from the
//! hydrogenic levels.

use polar_scf::relspectrum::{boson_energy, compare_hydrogenic, k_values_for_l, SpectrumParams, FINE_STRUCTURE};

fn main() -> polar_scf::Result<()> {
    let gamma = 0.1;
    for n in 1..=3i64 {
        for l in 0..n as u32 {
            let ks = k_values_for_l(l);
            for &k in &ks.values {
                let p = SpectrumParams::new(1.0, gamma, n, k)?;
                let e = boson_energy(&p)?;
                let c = compare_hydrogenic(&p)?;
                println!(
                    "n={n} l={l} k={k:+}: E = {:.12}  terms {:+.3e} {:+.3e} {:+.3e}  E - E_H = {:+.3e}",
                    e.total, e.term2, e.term4, e.term6, c.difference
                );
            }
            if ks.zero_filtered {
                println!("n={n} l={l}: k = 0 dropped");
            }
        }
    }
    let z = 1.0;
    let p = SpectrumParams::new(1.0, z * FINE_STRUCTURE, 1, 1)?;
    println!("gamma = Z alpha = {:.6e}: E = {:.15}", p.gamma, boson_energy(&p)?.total);
    Ok(())
}
