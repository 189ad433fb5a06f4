//! Quasirelativistic energy series of a charged vector boson and its
//! comparison with the hydrogenic spectrum.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

/// Fine-structure constant, for the convenience coupling `γ = Z α`.
pub const FINE_STRUCTURE: f64 = 7.2973525693e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumParams {
    pub m: f64,
    pub gamma: f64,
    pub n: i64,
    pub k: i64,
}

impl SpectrumParams {
    pub fn new(m: f64, gamma: f64, n: i64, k: i64) -> Result<Self> {
        let p = SpectrumParams { m, gamma, n, k };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::param("n", format!("principal quantum number must be >= 1, got {}", self.n)));
        }
        if self.k == 0 {
            return Err(Error::param("k", "k = 0 is outside the domain (the gamma^6 term has 4/k^2)"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::param("gamma", format!("must be non-negative, got {}", self.gamma)));
        }
        if !self.m.is_finite() {
            return Err(Error::param("m", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumBreakdown {
    pub leading: f64,
    pub term2: f64,
    pub term4: f64,
    pub term6: f64,
    pub total: f64,
}

/// `E = m/2 - mγ²/(2n²) - mγ⁴/(8n³)(4/|k| - 3/n) - mγ⁶/(8n⁴)(3/n² - 8/(n|k|) + 4/k²)`.
pub fn boson_energy(p: &SpectrumParams) -> Result<SpectrumBreakdown> {
    p.validate()?;
    let m = p.m;
    let g2 = p.gamma * p.gamma;
    let n = p.n as f64;
    let ka = p.k.abs() as f64;
    let k2 = (p.k * p.k) as f64;
    let leading = m / 2.0;
    let term2 = -m * g2 / (2.0 * n * n);
    let term4 = -m * g2 * g2 / (8.0 * n.powi(3)) * (4.0 / ka - 3.0 / n);
    let term6 = -m * g2 * g2 * g2 / (8.0 * n.powi(4)) * (3.0 / (n * n) - 8.0 / (n * ka) + 4.0 / k2);
    Ok(SpectrumBreakdown {
        leading,
        term2,
        term4,
        term6,
        total: leading + term2 + term4 + term6,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HydrogenicComparison {
    pub binding_boson: f64,
    pub binding_hydrogenic: f64,
    pub difference: f64,
    /// `-m/(8n³) (4/|k| - 3/n)`, the coefficient of `γ⁴` in `difference`.
    pub leading_coefficient: f64,
}

pub fn compare_hydrogenic(p: &SpectrumParams) -> Result<HydrogenicComparison> {
    let e = boson_energy(p)?;
    let n = p.n as f64;
    let binding_boson = e.term2 + e.term4 + e.term6;
    let binding_hydrogenic = -p.m * p.gamma * p.gamma / (2.0 * n * n);
    Ok(HydrogenicComparison {
        binding_boson,
        binding_hydrogenic,
        difference: binding_boson - binding_hydrogenic,
        leading_coefficient: -p.m / (8.0 * n.powi(3)) * (4.0 / p.k.abs() as f64 - 3.0 / n),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KValues {
    pub values: Vec<i64>,
    /// Set when `-l = 0` was dropped.
    pub zero_filtered: bool,
}

/// `{-l, l + 1}` without the forbidden `k = 0`.
pub fn k_values_for_l(l: u32) -> KValues {
    let l = l as i64;
    let raw = [-l, l + 1];
    KValues {
        values: raw.iter().copied().filter(|k| *k != 0).collect(),
        zero_filtered: raw.contains(&0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: i64,
    pub k: i64,
    pub gamma: f64,
    pub breakdown: SpectrumBreakdown,
}

/// Every `(n, k, γ)` combination, in that nesting order.
pub fn sweep(m: f64, gammas: &[f64], ns: &[i64], ks: &[i64]) -> Result<Vec<SweepRow>> {
    let mut out = Vec::with_capacity(gammas.len() * ns.len() * ks.len());
    for &n in ns {
        for &k in ks {
            for &gamma in gammas {
                let p = SpectrumParams::new(m, gamma, n, k)?;
                out.push(SweepRow {
                    n,
                    k,
                    gamma,
                    breakdown: boson_energy(&p)?,
                });
            }
        }
    }
    Ok(out)
}

/// Header `n,k,gamma,term2,term4,term6,total`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("n,k,gamma,term2,term4,term6,total\n");
    for r in rows {
        let b = &r.breakdown;
        let _ = writeln!(
            s,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.n, r.k, r.gamma, b.term2, b.term4, b.term6, b.total
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Same series with the powers of γ factored out first.
    fn oracle(m: f64, g: f64, n: f64, k: f64) -> f64 {
        let a = 0.5;
        let b = -1.0 / (2.0 * n * n);
        let c = -(4.0 * n - 3.0 * k.abs()) / (8.0 * n.powi(4) * k.abs());
        let d = -(3.0 * k * k - 8.0 * n * k.abs() + 4.0 * n * n) / (8.0 * n.powi(6) * k * k);
        m * (a + g * g * (b + g * g * (c + g * g * d)))
    }

    #[test]
    fn reference_point() {
        let e = boson_energy(&SpectrumParams::new(1.0, 0.1, 1, 1).unwrap()).unwrap();
        assert!((e.total - 0.494987625).abs() < 1e-12);
        assert!((e.term2 + 0.005).abs() < 1e-15);
        assert!((e.term4 + 1.25e-5).abs() < 1e-17);
        assert!((e.term6 - 1.25e-7).abs() < 1e-19);
        assert!((e.total - oracle(1.0, 0.1, 1.0, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_coupling_and_large_n() {
        let e = boson_energy(&SpectrumParams::new(3.0, 0.0, 4, -2).unwrap()).unwrap();
        assert_eq!(e.total, 1.5);
        let e = boson_energy(&SpectrumParams::new(1.0, 0.1, 1_000_000, 1).unwrap()).unwrap();
        assert!((e.total - 0.5).abs() < 1e-12);
        let c = compare_hydrogenic(&SpectrumParams::new(1.0, 0.0, 2, 1).unwrap()).unwrap();
        assert_eq!(c.difference, 0.0);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(SpectrumParams::new(1.0, 0.1, 1, 0), Err(Error::Parameter { ref name, .. }) if name == "k"));
        assert!(matches!(SpectrumParams::new(1.0, 0.1, 0, 1), Err(Error::Parameter { ref name, .. }) if name == "n"));
        let raw = SpectrumParams { m: 1.0, gamma: 0.1, n: 2, k: 0 };
        assert!(boson_energy(&raw).is_err());
    }

    #[test]
    fn hydrogenic_difference_coefficient() {
        let c = compare_hydrogenic(&SpectrumParams::new(1.0, 0.01, 1, 1).unwrap()).unwrap();
        assert_eq!(c.leading_coefficient, -0.125);
        // At γ = 0.01 the ratio still carries the γ⁶ term, of relative size γ².
        let ratio = c.difference / 0.01f64.powi(4);
        let sixth = -(3.0 - 8.0 + 4.0) / 8.0 * 0.01f64.powi(2);
        assert!(((ratio - (-0.125 + sixth)) / 0.125).abs() < 1e-6, "{ratio}");
        let c = compare_hydrogenic(&SpectrumParams::new(1.0, 1e-4, 1, 1).unwrap()).unwrap();
        let ratio = c.difference / 1e-4f64.powi(4);
        assert!(((ratio + 0.125) / 0.125).abs() < 1e-6, "{ratio}");

        let k1 = compare_hydrogenic(&SpectrumParams::new(1.0, 0.01, 2, 1).unwrap()).unwrap();
        let k2 = compare_hydrogenic(&SpectrumParams::new(1.0, 0.01, 2, 2).unwrap()).unwrap();
        assert!(k1.difference < k2.difference);
    }

    #[test]
    fn k_rule() {
        assert_eq!(k_values_for_l(0), KValues { values: vec![1], zero_filtered: true });
        assert_eq!(k_values_for_l(1).values, vec![-1, 2]);
        assert_eq!(k_values_for_l(3).values, vec![-3, 4]);
        assert!(!k_values_for_l(3).zero_filtered);
    }

    #[test]
    fn fourth_order_vanishes_where_4n_equals_3k() {
        // Term dominance cannot hold here: the γ⁴ term is exactly zero.
        let e = boson_energy(&SpectrumParams::new(1.0, 0.1, 3, 4).unwrap()).unwrap();
        assert_eq!(e.term4, 0.0);
        assert!(e.term6.abs() > 0.0);
    }

    #[test]
    fn csv_layout() {
        let rows = sweep(1.0, &[0.1], &[1, 2], &[1, -1]).unwrap();
        let csv = sweep_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("n,k,gamma,term2,term4,term6,total"));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "1");
        assert_eq!(first[1], "1");
        assert!((first[6].parse::<f64>().unwrap() - 0.494987625).abs() < 1e-15);
        assert_eq!(csv.lines().count(), 5);
    }
}
