//! Lowest eigenpairs of large symmetric operators.
//!
//! Block Davidson with the Olsen correction. The preconditioner is the
//! shifted inverse of a tridiagonal approximation to the operator, which for
//! the radial Fock matrix is its local part.

use nalgebra::{DMatrix, SymmetricEigen};

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone)]
pub(crate) struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for i in 0..n.saturating_sub(1) {
            y[i] += self.off[i] * x[i + 1];
            y[i + 1] += self.off[i] * x[i];
        }
        y
    }

    /// Solves `(T - shift) z = b` by Gaussian elimination without pivoting.
    pub fn solve_shifted(&self, shift: f64, b: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let mut c = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut prev_c = 0.0;
        let mut prev_z = 0.0;
        for i in 0..n {
            let sub = if i > 0 { self.off[i - 1] } else { 0.0 };
            let mut piv = self.diag[i] - shift - sub * prev_c;
            let floor = 1e-14 * (self.diag[i].abs() + shift.abs()).max(1e-300);
            if piv.abs() < floor {
                piv = floor.copysign(piv);
            }
            c[i] = if i + 1 < n { self.off[i] / piv } else { 0.0 };
            z[i] = (b[i] - sub * prev_z) / piv;
            prev_c = c[i];
            prev_z = z[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            z[i] -= c[i] * z[i + 1];
        }
        z
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct DavidsonOptions {
    /// Residual norm target, relative to `max(1, |θ|)`.
    pub tol: f64,
    pub max_iter: usize,
    pub max_basis: usize,
}

impl Default for DavidsonOptions {
    fn default() -> Self {
        DavidsonOptions {
            tol: 1e-9,
            max_iter: 300,
            max_basis: 40,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub max_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Orthogonalizes `v` against `basis` (two passes) and normalizes it.
/// Returns `None` when nothing independent is left.
fn orthonormalize_against(basis: &[Vec<f64>], mut v: Vec<f64>) -> Option<Vec<f64>> {
    let start = dot(&v, &v).sqrt();
    if start == 0.0 || !start.is_finite() {
        return None;
    }
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, &v);
            axpy(-c, b, &mut v);
        }
    }
    let n = dot(&v, &v).sqrt();
    if n < 1e-10 * start {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= n);
    Some(v)
}

/// The `nev` lowest eigenpairs of the symmetric operator `apply`.
pub(crate) fn davidson<F>(
    apply: F,
    precond: &Tridiagonal,
    guesses: &[Vec<f64>],
    nev: usize,
    opts: DavidsonOptions,
) -> Eigenpairs
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = precond.diag.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut images: Vec<Vec<f64>> = Vec::new();
    for g in guesses {
        if let Some(v) = orthonormalize_against(&basis, g.clone()) {
            images.push(apply(&v));
            basis.push(v);
        }
    }
    // Fill up with unit vectors near the middle of the mesh if guesses run short.
    let mut seed = n / 2;
    while basis.len() < nev {
        let mut e = vec![0.0; n];
        e[seed % n] = 1.0;
        seed += 7;
        if let Some(v) = orthonormalize_against(&basis, e) {
            images.push(apply(&v));
            basis.push(v);
        }
    }

    let mut values = vec![0.0; nev];
    let mut ritz = vec![vec![0.0; n]; nev];
    let mut max_residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let m = basis.len();
        let mut h = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]));
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

        let mut ritz_images = vec![vec![0.0; n]; nev];
        let mut residuals = Vec::with_capacity(nev);
        max_residual = 0.0;
        for (j, &col) in order.iter().take(nev).enumerate() {
            values[j] = eig.eigenvalues[col];
            ritz[j].iter_mut().for_each(|x| *x = 0.0);
            for i in 0..m {
                let s = eig.eigenvectors[(i, col)];
                axpy(s, &basis[i], &mut ritz[j]);
                axpy(s, &images[i], &mut ritz_images[j]);
            }
            let mut r = ritz_images[j].clone();
            axpy(-values[j], &ritz[j], &mut r);
            let rn = dot(&r, &r).sqrt() / values[j].abs().max(1.0);
            max_residual = max_residual.max(rn);
            residuals.push((r, rn));
        }
        if max_residual < opts.tol {
            return Eigenpairs {
                values,
                vectors: ritz,
                max_residual,
                converged: true,
            };
        }

        if m + nev > opts.max_basis {
            basis = ritz.clone();
            images = ritz_images;
        }
        let mut added = 0;
        for (j, (r, rn)) in residuals.into_iter().enumerate() {
            if rn < opts.tol {
                continue;
            }
            let theta = values[j];
            let t1 = precond.solve_shifted(theta, &r);
            let t2 = precond.solve_shifted(theta, &ritz[j]);
            let denom = dot(&ritz[j], &t2);
            let mut t = t1;
            if denom.abs() > 0.0 && denom.is_finite() {
                let eps = dot(&ritz[j], &t) / denom;
                axpy(-eps, &t2, &mut t);
            }
            if let Some(v) = orthonormalize_against(&basis, t) {
                images.push(apply(&v));
                basis.push(v);
                added += 1;
            }
        }
        if added == 0 {
            break;
        }
    }
    Eigenpairs {
        values,
        vectors: ritz,
        max_residual,
        converged: false,
    }
}
