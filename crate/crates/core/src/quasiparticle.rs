//! Projector density matrices, resolvents, the Dyson equation and
//! electron-hole pair quantities on a finite basis.
//!
//! A self-energy model is diagonal in a basis of momentum samples `k_i`
//! spread symmetrically over `[-k_max, k_max]`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const DEFAULT_ETA: f64 = 1e-6;
pub const DEFAULT_K_MAX: f64 = 2.0;
pub const DEFAULT_K_POINTS: usize = 129;
pub const DEFAULT_LIGHT_THRESHOLD: f64 = 1e-3;
/// Largest tolerated asymmetry of a user-supplied self-energy.
pub const SYMMETRY_TOL: f64 = 1e-8;

const NORM_TOL: f64 = 1e-10;

/// `|m⟩⟨n|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorRho {
    pub matrix: CMatrix,
}

pub fn projector(m: &CVector, n: &CVector) -> Result<ProjectorRho> {
    if m.len() != n.len() {
        return Err(Error::Shape {
            expected: m.len(),
            got: n.len(),
        });
    }
    for (name, v) in [("m_state", m), ("n_state", n)] {
        let nrm = v.norm();
        if nrm == 0.0 {
            return Err(Error::param(name, "zero-norm state"));
        }
        if (nrm - 1.0).abs() > NORM_TOL {
            return Err(Error::Precondition(format!("{name} has norm {nrm}, expected 1")));
        }
    }
    Ok(ProjectorRho {
        matrix: m * n.adjoint(),
    })
}

impl ProjectorRho {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// Frobenius norm of `ρ² - ρ`.
    pub fn idempotency_residual(&self) -> f64 {
        (&self.matrix * &self.matrix - &self.matrix).norm()
    }

    /// Largest entry of `ρ - ρ†`.
    pub fn hermiticity_residual(&self) -> f64 {
        max_abs(&(&self.matrix - self.matrix.adjoint()))
    }

    /// `Sp ρ h`.
    pub fn trace_with(&self, h: &CMatrix) -> Result<Complex64> {
        check_square(h, self.dim())?;
        Ok((&self.matrix * h).trace())
    }
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn check_square(m: &CMatrix, d: usize) -> Result<()> {
    if m.nrows() != d {
        return Err(Error::Shape {
            expected: d,
            got: m.nrows(),
        });
    }
    if m.ncols() != d {
        return Err(Error::Shape {
            expected: d,
            got: m.ncols(),
        });
    }
    Ok(())
}

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Resolvent at a complex energy, stored together with its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenValue {
    pub energy: Complex64,
    pub matrix: CMatrix,
    /// `G⁻¹`, kept so that Dyson resummation needs no second inversion.
    pub inverse: CMatrix,
}

impl GreenValue {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `‖G⁻¹ G - I‖_max`.
    pub fn identity_residual(&self) -> f64 {
        let d = self.dim();
        max_abs(&(&self.inverse * &self.matrix - CMatrix::identity(d, d)))
    }
}

fn invert(a: &CMatrix, what: &str) -> Result<CMatrix> {
    a.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("{what} is not invertible")))
}

/// `(z - h)⁻¹` for hermitian `h`.
pub fn resolvent(h: &CMatrix, z: Complex64) -> Result<GreenValue> {
    check_square(h, h.nrows())?;
    let asym = max_abs(&(h - h.adjoint()));
    if asym > SYMMETRY_TOL * max_abs(h).max(1.0) {
        return Err(Error::SymmetryViolation {
            asymmetry: asym,
            tolerance: SYMMETRY_TOL,
        });
    }
    let d = h.nrows();
    let inverse = CMatrix::identity(d, d) * z - h;
    if z.im == 0.0 {
        let eig = h.clone().symmetric_eigenvalues();
        if let Some(e) = eig.iter().find(|e| (z.re - **e).abs() <= 1e-12 * z.re.abs().max(1.0)) {
            return Err(Error::Singular(format!(
                "energy {} coincides with the eigenvalue {e} and the broadening is zero",
                z.re
            )));
        }
    }
    let matrix = invert(&inverse, "E + iη - h")?;
    Ok(GreenValue {
        energy: z,
        matrix,
        inverse,
    })
}

/// Bare Green function `G₀(E) = (E + iη - h)⁻¹`.
pub fn green0(h: &CMatrix, energy: f64, eta: f64) -> Result<GreenValue> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::param("eta", format!("broadening must be non-negative, got {eta}")));
    }
    if !energy.is_finite() {
        return Err(Error::param("energy", "must be finite"));
    }
    resolvent(h, Complex64::new(energy, eta))
}

/// Correlation part of the self-energy, diagonal in momentum samples.
#[derive(Debug, Clone, PartialEq)]
pub enum SelfEnergyModel {
    Zero,
    ConstantShift(f64),
    /// Eigenvalue `Σ_j c_j k^j` at momentum `k`.
    DiagonalPolynomial { coeffs: Vec<f64> },
    /// Explicit matrix in the momentum basis.
    UserMatrix(CMatrix),
}

impl SelfEnergyModel {
    pub fn kind(&self) -> &'static str {
        match self {
            SelfEnergyModel::Zero => "zero",
            SelfEnergyModel::ConstantShift(_) => "constant_shift",
            SelfEnergyModel::DiagonalPolynomial { .. } => "diagonal_polynomial",
            SelfEnergyModel::UserMatrix(_) => "user_matrix",
        }
    }

    /// The matrix on momentum samples `k`.
    pub fn matrix(&self, k: &[f64]) -> Result<CMatrix> {
        let d = k.len();
        Ok(match self {
            SelfEnergyModel::Zero => CMatrix::zeros(d, d),
            SelfEnergyModel::ConstantShift(c) => CMatrix::identity(d, d) * Complex64::new(*c, 0.0),
            SelfEnergyModel::DiagonalPolynomial { coeffs } => CMatrix::from_diagonal(
                &CVector::from_iterator(d, k.iter().map(|&x| Complex64::new(poly(coeffs, x), 0.0))),
            ),
            SelfEnergyModel::UserMatrix(m) => {
                check_square(m, d)?;
                let asym = max_abs(&(m - m.adjoint()));
                if asym > SYMMETRY_TOL {
                    return Err(Error::SymmetryViolation {
                        asymmetry: asym,
                        tolerance: SYMMETRY_TOL,
                    });
                }
                m.clone()
            }
        })
    }
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// `count` uniform samples on `[-k_max, k_max]`.
pub fn momentum_grid(count: usize, k_max: f64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::param("k_points", "need at least one sample"));
    }
    if !(k_max >= 0.0 && k_max.is_finite()) {
        return Err(Error::param("k_max", format!("must be non-negative, got {k_max}")));
    }
    if count == 1 {
        return Ok(vec![0.0]);
    }
    let step = 2.0 * k_max / (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            // Mirror the upper half so that k and -k are exact negatives.
            let j = i.min(count - 1 - i) as f64;
            let v = k_max - j * step;
            if 2 * i < count - 1 {
                -v
            } else if 2 * i == count - 1 {
                0.0
            } else {
                v
            }
        })
        .collect())
}

/// `G = (G₀⁻¹ - Σ)⁻¹` with `Σ` taken on the default momentum samples.
pub fn dyson_solve(g0: &GreenValue, sigma: &SelfEnergyModel) -> Result<GreenValue> {
    let k = momentum_grid(g0.dim(), DEFAULT_K_MAX)?;
    dyson_solve_on(g0, sigma, &k)
}

pub fn dyson_solve_on(g0: &GreenValue, sigma: &SelfEnergyModel, k: &[f64]) -> Result<GreenValue> {
    let s = sigma.matrix(k)?;
    check_square(&s, g0.dim())?;
    let inverse = &g0.inverse - s;
    let matrix = invert(&inverse, "G0^-1 - Sigma")?;
    Ok(GreenValue {
        energy: g0.energy,
        matrix,
        inverse,
    })
}

/// Split of the mass-operator eigenvalue `-(ΔM(0) + ΔM(k))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassOperator {
    pub delta_m0: f64,
    pub k: Vec<f64>,
    /// `ΔM(k)` after symmetrization; `ΔM(0) = 0` by construction.
    pub delta_mk: Vec<f64>,
    /// `max |f(k) - f(-k)|` of the raw eigenvalues before symmetrization.
    pub asymmetry: f64,
    /// `d²ΔM/dk²` at `k = 0`.
    pub curvature: f64,
}

pub fn mass_operator_eigen(sigma: &SelfEnergyModel, k_samples: &[f64]) -> Result<MassOperator> {
    if k_samples.is_empty() {
        return Err(Error::param("k_samples", "need at least one sample"));
    }
    // Raw eigenvalue f(k), its mirror f(-k), f(0) and, when known in closed
    // form, f''(0).
    let (raw, mirrored, f0, second): (Vec<f64>, Vec<f64>, f64, Option<f64>) = match sigma {
        SelfEnergyModel::Zero => (vec![0.0; k_samples.len()], vec![0.0; k_samples.len()], 0.0, Some(0.0)),
        SelfEnergyModel::ConstantShift(c) => {
            (vec![*c; k_samples.len()], vec![*c; k_samples.len()], *c, Some(0.0))
        }
        SelfEnergyModel::DiagonalPolynomial { coeffs } => (
            k_samples.iter().map(|&k| poly(coeffs, k)).collect(),
            k_samples.iter().map(|&k| poly(coeffs, -k)).collect(),
            poly(coeffs, 0.0),
            Some(2.0 * coeffs.get(2).copied().unwrap_or(0.0)),
        ),
        SelfEnergyModel::UserMatrix(m) => {
            check_square(m, k_samples.len())?;
            let mut off: f64 = 0.0;
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    if i != j {
                        off = off.max(m[(i, j)].norm());
                    }
                }
            }
            if off > SYMMETRY_TOL {
                return Err(Error::Precondition(format!(
                    "user self-energy must be diagonal in the momentum basis (off-diagonal {off:e})"
                )));
            }
            let mirror = |x: f64| {
                k_samples
                    .iter()
                    .position(|&y| (x + y).abs() <= 1e-12 * x.abs().max(1.0))
                    .ok_or_else(|| {
                        Error::Precondition(format!("momentum samples lack the mirror of k = {x}"))
                    })
            };
            let diag: Vec<f64> = (0..m.nrows()).map(|i| m[(i, i)].re).collect();
            let mirrored = k_samples
                .iter()
                .map(|&x| mirror(x).map(|j| diag[j]))
                .collect::<Result<Vec<_>>>()?;
            let f0 = diag[mirror(0.0)?];
            (diag, mirrored, f0, None)
        }
    };

    let asymmetry = raw
        .iter()
        .zip(&mirrored)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if matches!(sigma, SelfEnergyModel::UserMatrix(_)) && asymmetry > SYMMETRY_TOL {
        return Err(Error::SymmetryViolation {
            asymmetry,
            tolerance: SYMMETRY_TOL,
        });
    }
    let delta_mk: Vec<f64> = raw
        .iter()
        .zip(&mirrored)
        .map(|(a, b)| -(0.5 * (a + b) - f0))
        .collect();
    let curvature = match second {
        Some(c) => -c,
        None => finite_difference_curvature(k_samples, &delta_mk)?,
    };
    Ok(MassOperator {
        delta_m0: -f0,
        k: k_samples.to_vec(),
        delta_mk,
        asymmetry,
        curvature,
    })
}

/// Second difference at `k = 0` from the two nearest samples on either side.
fn finite_difference_curvature(k: &[f64], f: &[f64]) -> Result<f64> {
    let zero = k
        .iter()
        .position(|x| *x == 0.0)
        .ok_or_else(|| Error::Precondition("momentum samples must include k = 0".into()))?;
    let right = k
        .iter()
        .enumerate()
        .filter(|(_, x)| **x > 0.0)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i);
    match right {
        Some(i) => Ok(2.0 * (f[i] - f[zero]) / (k[i] * k[i])),
        None => Ok(0.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Light,
    Heavy,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairQuantities {
    pub delta_m0: f64,
    pub eps0: f64,
    pub n: usize,
    pub offset_c: f64,
    /// `Extr E = (ΔM(0) + ε(0)) N`.
    pub extremum: f64,
    /// `Extr Ẽ = Extr E - C`.
    pub extremum_tilde: f64,
    pub eps_plus: f64,
    pub eps_minus: f64,
    pub gap: f64,
    pub regime: Regime,
    /// The pair costs no energy and the band obeys a Schrödinger equation.
    pub schrodinger_limit: bool,
}

pub fn classify(delta_m0: f64, gap: f64, light_threshold: f64) -> Regime {
    if delta_m0.abs() < light_threshold && gap.abs() < light_threshold {
        Regime::Light
    } else if delta_m0 >= 1.0 {
        Regime::Heavy
    } else {
        Regime::Indeterminate
    }
}

pub fn pair_quantities(delta_m0: f64, eps0: f64, n: usize, c: f64) -> Result<PairQuantities> {
    pair_quantities_with(delta_m0, eps0, n, c, DEFAULT_LIGHT_THRESHOLD)
}

pub fn pair_quantities_with(
    delta_m0: f64,
    eps0: f64,
    n: usize,
    c: f64,
    light_threshold: f64,
) -> Result<PairQuantities> {
    if n == 0 {
        return Err(Error::param("n", "particle count must be at least 1"));
    }
    let extremum = (delta_m0 + eps0) * n as f64;
    let extremum_tilde = extremum - c;
    let eps_plus = (extremum_tilde - delta_m0) / 2.0;
    let eps_minus = (extremum_tilde + delta_m0) / 2.0;
    let gap = (eps_plus - eps_minus) / 2.0;
    let regime = classify(delta_m0, gap, light_threshold);
    Ok(PairQuantities {
        delta_m0,
        eps0,
        n,
        offset_c: c,
        extremum,
        extremum_tilde,
        eps_plus,
        eps_minus,
        gap,
        regime,
        schrodinger_limit: regime == Regime::Light,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub energy: f64,
    pub trace_imag_g: f64,
    /// Poles of the dressed resolvent closer to this energy than to any
    /// other sample.
    pub pole_estimates: Vec<f64>,
}

/// `Im Sp G(E)` of the Dyson-resummed resolvent over `energies`.
pub fn resolvent_sweep(
    h: &CMatrix,
    sigma: &SelfEnergyModel,
    energies: &[f64],
    eta: f64,
) -> Result<Vec<SweepRow>> {
    let k = momentum_grid(h.nrows(), DEFAULT_K_MAX)?;
    resolvent_sweep_on(h, sigma, &k, energies, eta)
}

/// [`resolvent_sweep`] with `Σ` taken on the momentum samples `k`.
pub fn resolvent_sweep_on(
    h: &CMatrix,
    sigma: &SelfEnergyModel,
    k: &[f64],
    energies: &[f64],
    eta: f64,
) -> Result<Vec<SweepRow>> {
    let dressed = h + sigma.matrix(&k)?;
    let poles: Vec<f64> = dressed.clone().symmetric_eigenvalues().iter().copied().collect();
    let mut rows: Vec<SweepRow> = energies
        .iter()
        .map(|&e| {
            let g0 = green0(h, e, eta)?;
            let g = dyson_solve_on(&g0, sigma, &k)?;
            Ok(SweepRow {
                energy: e,
                trace_imag_g: g.matrix.trace().im,
                pole_estimates: Vec::new(),
            })
        })
        .collect::<Result<_>>()?;
    if rows.len() >= 2 {
        let lo = energies.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sorted = poles;
        sorted.sort_by(f64::total_cmp);
        for p in sorted.into_iter().filter(|p| *p >= lo && *p <= hi) {
            let nearest = (0..rows.len())
                .min_by(|&a, &b| (energies[a] - p).abs().total_cmp(&(energies[b] - p).abs()))
                .unwrap_or(0);
            rows[nearest].pole_estimates.push(p);
        }
    }
    Ok(rows)
}

/// Header `E,trace_imag_G,pole_estimates`; poles are joined with `;`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("E,trace_imag_G,pole_estimates\n");
    for r in rows {
        let poles: Vec<String> = r.pole_estimates.iter().map(|p| format!("{p:.16e}")).collect();
        let _ = writeln!(s, "{:.16e},{:.16e},{}", r.energy, r.trace_imag_g, poles.join(";"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> CMatrix {
        let a = CMatrix::from_fn(d, d, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        (&a + a.adjoint()) * c(0.5 * scale)
    }

    fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> CVector {
        let v = CVector::from_fn(d, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let n = v.norm();
        v / c(n)
    }

    #[test]
    fn unit_projector() {
        let mut e = CVector::zeros(4);
        e[0] = c(1.0);
        let p = projector(&e, &e).unwrap();
        assert_eq!(p.matrix[(0, 0)], c(1.0));
        assert_eq!(p.idempotency_residual(), 0.0);
        assert_eq!(p.trace(), c(1.0));
        assert!(matches!(projector(&CVector::zeros(4), &e), Err(Error::Parameter { .. })));
        assert!(projector(&(e.clone() * c(2.0)), &e).is_err());
    }

    #[test]
    fn random_diagonal_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = random_unit(&mut rng, 30);
        let p = projector(&v, &v).unwrap();
        assert!(p.idempotency_residual() < 1e-12);
        assert!(p.hermiticity_residual() < 1e-12);
        assert!((p.trace() - c(1.0)).norm() < 1e-12);
    }

    #[test]
    fn scalar_resolvent() {
        let h = CMatrix::from_element(1, 1, c(-0.5));
        let g = green0(&h, 0.0, 1e-12).unwrap();
        assert!((g.matrix[(0, 0)] - c(2.0)).norm() < 1e-9);
        let g = green0(&h, 0.0, 0.0).unwrap();
        assert_eq!(g.matrix[(0, 0)], c(2.0));
        assert!(matches!(green0(&h, -0.5, 0.0), Err(Error::Singular(_))));
        assert!(matches!(green0(&h, 0.0, -1.0), Err(Error::Parameter { .. })));
    }

    #[test]
    fn residue_at_pole() {
        let h = CMatrix::from_diagonal(&CVector::from_vec(vec![c(-1.0), c(0.5)]));
        for d in [1e-3, 1e-5, 1e-7] {
            let g = green0(&h, -1.0 + d, 0.0).unwrap();
            assert!((g.matrix[(0, 0)] * c(d) - c(1.0)).norm() < 1e-8);
        }
    }

    #[test]
    fn resolvent_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = random_hermitian(&mut rng, 50, 1.0);
        let g = green0(&h, 0.3, 0.1).unwrap();
        let d = 50;
        let lhs = (CMatrix::identity(d, d) * Complex64::new(0.3, 0.1) - &h) * &g.matrix;
        assert!(max_abs(&(lhs - CMatrix::identity(d, d))) < 1e-12);
    }

    #[test]
    fn zero_and_constant_self_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(&mut rng, 20, 1.0);
        let g0 = green0(&h, 0.2, 0.05).unwrap();
        assert_eq!(dyson_solve(&g0, &SelfEnergyModel::Zero).unwrap().matrix, g0.matrix);
        let shift = 0.37;
        let g = dyson_solve(&g0, &SelfEnergyModel::ConstantShift(shift)).unwrap();
        let moved = green0(&h, 0.2 - shift, 0.05).unwrap();
        assert!(max_abs(&(g.matrix - moved.matrix)) < 1e-10);
    }

    #[test]
    fn user_matrix_must_be_hermitian() {
        let mut m = CMatrix::zeros(3, 3);
        m[(0, 1)] = c(1e-3);
        let s = SelfEnergyModel::UserMatrix(m);
        assert!(matches!(s.matrix(&[-1.0, 0.0, 1.0]), Err(Error::SymmetryViolation { .. })));
    }

    #[test]
    fn momentum_grid_is_symmetric() {
        let k = momentum_grid(DEFAULT_K_POINTS, DEFAULT_K_MAX).unwrap();
        assert_eq!(k[64], 0.0);
        assert_eq!(k[0], -2.0);
        assert_eq!(k[128], 2.0);
        for i in 0..k.len() {
            assert_eq!(k[i], -k[k.len() - 1 - i]);
        }
    }

    #[test]
    fn mass_operator_examples() {
        let k = momentum_grid(DEFAULT_K_POINTS, DEFAULT_K_MAX).unwrap();
        let z = mass_operator_eigen(&SelfEnergyModel::Zero, &k).unwrap();
        assert_eq!(z.delta_m0, 0.0);
        assert!(z.delta_mk.iter().all(|x| *x == 0.0));

        let s = SelfEnergyModel::DiagonalPolynomial {
            coeffs: vec![-0.3, 0.0, -0.01],
        };
        let m = mass_operator_eigen(&s, &k).unwrap();
        assert!((m.delta_m0 - 0.3).abs() < 1e-15);
        for (ki, d) in k.iter().zip(&m.delta_mk) {
            assert!((d - 0.01 * ki * ki).abs() < 1e-15);
        }
        assert_eq!(m.asymmetry, 0.0);
        assert!((m.curvature - 0.02).abs() < 1e-15);
    }

    #[test]
    fn odd_terms_are_symmetrized_and_reported() {
        let k = momentum_grid(9, 1.0).unwrap();
        let s = SelfEnergyModel::DiagonalPolynomial {
            coeffs: vec![0.0, 0.5, 1.0],
        };
        let m = mass_operator_eigen(&s, &k).unwrap();
        assert!((m.asymmetry - 1.0).abs() < 1e-15);
        for i in 0..k.len() {
            assert_eq!(m.delta_mk[i], m.delta_mk[k.len() - 1 - i]);
        }

        let diag: Vec<Complex64> = k.iter().map(|x| c(0.1 * x)).collect();
        let user = SelfEnergyModel::UserMatrix(CMatrix::from_diagonal(&CVector::from_vec(diag)));
        assert!(matches!(
            mass_operator_eigen(&user, &k),
            Err(Error::SymmetryViolation { .. })
        ));
    }

    #[test]
    fn pair_examples() {
        let p = pair_quantities(0.2, -0.5, 1, 0.0).unwrap();
        assert!((p.extremum + 0.3).abs() < 1e-15);

        let p = pair_quantities(1.0, -1.0, 1, 0.0).unwrap();
        assert_eq!(p.extremum_tilde, 0.0);
        assert_eq!((p.eps_plus, p.eps_minus, p.gap), (-0.5, 0.5, -0.5));
        assert_eq!(p.regime, Regime::Heavy);

        let p = pair_quantities(0.0, -0.5, 1, 0.0).unwrap();
        assert_eq!(p.gap, 0.0);
        assert_eq!(p.regime, Regime::Light);
        assert!(p.schrodinger_limit);

        let p = pair_quantities(0.5, -0.5, 1, 0.0).unwrap();
        assert_eq!(p.regime, Regime::Indeterminate);
        assert!(pair_quantities(0.1, 0.0, 0, 0.0).is_err());
    }

    #[test]
    fn sweep_marks_poles() {
        let h = CMatrix::from_diagonal(&CVector::from_vec(vec![c(-0.5), c(0.25)]));
        let e: Vec<f64> = (0..=40).map(|i| -1.0 + 0.05 * i as f64).collect();
        let rows = resolvent_sweep(&h, &SelfEnergyModel::ConstantShift(0.1), &e, 1e-3).unwrap();
        let marked: Vec<f64> = rows.iter().flat_map(|r| r.pole_estimates.clone()).collect();
        assert_eq!(marked.len(), 2);
        assert!((marked[0] + 0.4).abs() < 1e-12);
        let csv = sweep_csv(&rows);
        assert!(csv.starts_with("E,trace_imag_G,pole_estimates\n"));
        assert_eq!(csv.lines().count(), 42);
        // Lorentzian peak at the shifted pole
        let at = rows.iter().position(|r| (r.energy + 0.4).abs() < 1e-9).unwrap();
        assert!(rows[at].trace_imag_g < -900.0);
    }
}
