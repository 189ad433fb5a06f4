//! Logarithmic radial mesh, quadrature and hydrogenic orbitals.
//!
//! Radial functions are stored as reduced orbitals `u(r) = r R(r)` sampled on
//! a geometric mesh `r_i = r_min * ratio^i`. Hartree atomic units throughout.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Minimum number of points for finite-difference operators.
pub const MIN_OPERATOR_POINTS: usize = 16;

/// Default mesh used by the SCF engine: `r_min = 1e-6 / Z`, `r_max = 50`, 2000 points.
pub const DEFAULT_R_MIN_TIMES_Z: f64 = 1e-6;
pub const DEFAULT_R_MAX: f64 = 50.0;
pub const DEFAULT_POINTS: usize = 2000;

/// Gregory end corrections to the trapezoid rule (fourth order).
const GREGORY: [f64; 3] = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    r: Vec<f64>,
    weights: Vec<f64>,
    dr: Vec<f64>,
    log_step: f64,
}

impl RadialGrid {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.r
    }

    /// Quadrature weights used by [`integrate`].
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `h * r_i`: the Jacobian of `dr = r dx` on the uniform log mesh. This is
    /// the metric in which the finite-difference kinetic operator and the
    /// Coulomb kernels are exactly symmetric.
    pub fn jacobian(&self) -> &[f64] {
        &self.dr
    }

    pub fn log_step(&self) -> f64 {
        self.log_step
    }

    pub fn ratio(&self) -> f64 {
        self.log_step.exp()
    }

    pub fn r_min(&self) -> f64 {
        self.r[0]
    }

    pub fn r_max(&self) -> f64 {
        self.r[self.r.len() - 1]
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.weights)
            .map(|((x, y), w)| x * y * w)
            .sum()
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.inner(a, a).sqrt()
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::Shape {
                expected: self.len(),
                got: len,
            });
        }
        Ok(())
    }
}

/// Geometric mesh on `[r_min, r_max]` with `n` points.
///
/// Weights are the trapezoid rule in `x = ln r` with Gregory end corrections,
/// plus `r_min` on the first point to account for `[0, r_min]`.
pub fn make_grid(r_min: f64, r_max: f64, n: usize) -> Result<RadialGrid> {
    if !(r_min > 0.0 && r_min.is_finite()) {
        return Err(Error::param("r_min", format!("must be positive, got {r_min}")));
    }
    if !(r_max > r_min && r_max.is_finite()) {
        return Err(Error::param(
            "r_max",
            format!("must exceed r_min = {r_min}, got {r_max}"),
        ));
    }
    if n < 2 {
        return Err(Error::param("n_points", format!("need at least 2, got {n}")));
    }
    let h = (r_max / r_min).ln() / (n - 1) as f64;
    let r: Vec<f64> = (0..n).map(|i| r_min * (h * i as f64).exp()).collect();

    let mut g = vec![1.0; n];
    if n >= 2 * GREGORY.len() {
        for (i, c) in GREGORY.iter().enumerate() {
            g[i] = *c;
            g[n - 1 - i] = *c;
        }
    } else {
        g[0] = 0.5;
        g[n - 1] = 0.5;
    }
    let dr: Vec<f64> = r.iter().map(|ri| h * ri).collect();
    let mut weights: Vec<f64> = dr.iter().zip(&g).map(|(d, gi)| d * gi).collect();
    weights[0] += r_min;

    Ok(RadialGrid {
        r,
        weights,
        dr,
        log_step: h,
    })
}

/// Default mesh for nuclear charge `z`.
pub fn default_grid(z: f64) -> Result<RadialGrid> {
    make_grid(DEFAULT_R_MIN_TIMES_Z / z, DEFAULT_R_MAX, DEFAULT_POINTS)
}

/// `Σ f_i w_i`.
pub fn integrate(f: &[f64], g: &RadialGrid) -> Result<f64> {
    g.check_len(f.len())?;
    Ok(f.iter().zip(&g.weights).map(|(a, w)| a * w).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OrbitalSpin {
    Up,
    Down,
    Paired,
}

/// Reduced radial orbital `u = r R(r)` with its quantum numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialOrbital {
    pub u: Vec<f64>,
    pub n: usize,
    pub l: usize,
    pub spin: OrbitalSpin,
    pub occupation: f64,
}

impl RadialOrbital {
    pub fn label(&self) -> String {
        shell_label(self.n, self.l)
    }

    /// Number of sign changes, ignoring samples below `1e-6` of the peak.
    pub fn node_count(&self) -> usize {
        count_nodes(&self.u)
    }
}

pub(crate) fn count_nodes(u: &[f64]) -> usize {
    let peak = u.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let floor = 1e-6 * peak;
    let mut last_sign = 0.0;
    let mut nodes = 0;
    for &x in u {
        if x.abs() <= floor {
            continue;
        }
        let s = x.signum();
        if last_sign != 0.0 && s != last_sign {
            nodes += 1;
        }
        last_sign = s;
    }
    nodes
}

const L_LETTERS: [char; 7] = ['s', 'p', 'd', 'f', 'g', 'h', 'i'];

pub fn shell_label(n: usize, l: usize) -> String {
    match L_LETTERS.get(l) {
        Some(c) => format!("{n}{c}"),
        None => format!("{n}[l={l}]"),
    }
}

pub fn l_from_letter(c: char) -> Option<usize> {
    L_LETTERS.iter().position(|&x| x == c.to_ascii_lowercase())
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Generalized Laguerre polynomial `L_k^α(x)` by upward recurrence.
pub fn laguerre(k: usize, alpha: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if k == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for j in 1..k {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + alpha - x) * cur - (jf + alpha) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Normalized bound state of `-Z/r`, positive near the origin.
pub fn hydrogenic_orbital(z: f64, n: usize, l: usize, g: &RadialGrid) -> Result<RadialOrbital> {
    if n == 0 {
        return Err(Error::param("n", "principal quantum number must be >= 1"));
    }
    if l >= n {
        return Err(Error::param("l", format!("need l < n, got l = {l}, n = {n}")));
    }
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::param("z", format!("nuclear charge must be positive, got {z}")));
    }
    let nf = n as f64;
    let norm =
        ((2.0 * z / nf) * factorial(n - l - 1) / (2.0 * nf * factorial(n + l))).sqrt();
    let mut u: Vec<f64> = g
        .points()
        .iter()
        .map(|&r| {
            let rho = 2.0 * z * r / nf;
            norm * rho.powi(l as i32 + 1) * (-rho / 2.0).exp()
                * laguerre(n - l - 1, (2 * l + 1) as f64, rho)
        })
        .collect();
    let s = g.norm(&u);
    for x in u.iter_mut() {
        *x /= s;
    }
    Ok(RadialOrbital {
        u,
        n,
        l,
        spin: OrbitalSpin::Paired,
        occupation: 0.0,
    })
}

/// `-½ [u'' - l(l+1) u / r²]` by three-point differences in `x = ln r`.
///
/// With `u = √r φ(x)` the operator becomes `-(1/2 r^{3/2}) [φ'' - (l+½)² φ]`.
/// Below the mesh the ghost value follows the regular solution,
/// `φ_{-1} = φ_0 e^{-(l+½)h}`; above it `φ` vanishes.
pub fn kinetic_apply(o: &RadialOrbital, g: &RadialGrid) -> Result<Vec<f64>> {
    kinetic_apply_raw(&o.u, o.l, g)
}

pub(crate) fn kinetic_apply_raw(u: &[f64], l: usize, g: &RadialGrid) -> Result<Vec<f64>> {
    if g.len() < MIN_OPERATOR_POINTS {
        return Err(Error::Capacity {
            what: "grid points below operator minimum",
            value: g.len(),
            limit: MIN_OPERATOR_POINTS,
        });
    }
    g.check_len(u.len())?;
    let r = g.points();
    let n = r.len();
    let h2 = g.log_step() * g.log_step();
    let c = (l as f64 + 0.5).powi(2);
    let ghost = inner_ghost_factor(l, g.log_step());
    let phi: Vec<f64> = u.iter().zip(r).map(|(x, ri)| x / ri.sqrt()).collect();
    let out = (0..n)
        .map(|i| {
            let left = if i > 0 { phi[i - 1] } else { ghost * phi[0] };
            let right = if i + 1 < n { phi[i + 1] } else { 0.0 };
            let d2 = (right - 2.0 * phi[i] + left) / h2;
            -0.5 * (d2 - c * phi[i]) / (r[i] * r[i].sqrt())
        })
        .collect();
    Ok(out)
}

pub(crate) fn inner_ghost_factor(l: usize, h: f64) -> f64 {
    (-(l as f64 + 0.5) * h).exp()
}

/// `-Z/r` on the mesh.
pub fn nuclear_potential(z: f64, g: &RadialGrid) -> Vec<f64> {
    g.points().iter().map(|r| -z / r).collect()
}

/// Orbital dump: header `r,u`, one row per mesh point, 17 significant digits.
pub fn orbital_csv(o: &RadialOrbital, g: &RadialGrid) -> Result<String> {
    g.check_len(o.u.len())?;
    let mut s = String::from("r,u\n");
    for (r, u) in g.points().iter().zip(&o.u) {
        let _ = writeln!(s, "{r:.16e},{u:.16e}");
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> RadialGrid {
        make_grid(1e-6, 50.0, 2000).unwrap()
    }

    fn energy(o: &RadialOrbital, z: f64, g: &RadialGrid) -> f64 {
        let t = kinetic_apply(o, g).unwrap();
        let v = nuclear_potential(z, g);
        let hu: Vec<f64> = t.iter().zip(&v).zip(&o.u).map(|((t, v), u)| t + v * u).collect();
        g.inner(&o.u, &hu)
    }

    #[test]
    fn geometric_ratios() {
        let g = make_grid(1e-6, 50.0, 5).unwrap();
        let r = g.points();
        let q0 = r[1] / r[0];
        for w in r.windows(2) {
            assert!((w[1] / w[0] - q0).abs() < 1e-12 * q0);
        }
    }

    #[test]
    fn strictly_increasing() {
        let g = make_grid(1e-3, 10.0, 8).unwrap();
        assert!(g.points().windows(2).all(|w| w[1] > w[0]));
        assert!(g.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn interval_length() {
        let g = grid();
        let ones = vec![1.0; g.len()];
        let len = integrate(&ones, &g).unwrap();
        assert!(((len - (50.0 - 1e-6)) / 50.0).abs() < 1e-6, "{len}");
    }

    #[test]
    fn bad_bounds() {
        assert!(make_grid(0.0, 1.0, 20).is_err());
        assert!(make_grid(2.0, 1.0, 20).is_err());
        assert!(make_grid(1e-3, 1.0, 1).is_err());
    }

    #[test]
    fn analytic_integrals() {
        let g = grid();
        let r = g.points();
        let e: Vec<f64> = r.iter().map(|r| (-r).exp()).collect();
        assert!((integrate(&e, &g).unwrap() - 1.0).abs() < 1e-8);
        let re: Vec<f64> = r.iter().map(|r| r * (-r).exp()).collect();
        assert!((integrate(&re, &g).unwrap() - 1.0).abs() < 1e-8);
        let u2: Vec<f64> = r.iter().map(|r| (2.0 * r * (-r).exp()).powi(2)).collect();
        assert!((integrate(&u2, &g).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn length_mismatch() {
        let g = grid();
        assert!(matches!(integrate(&[1.0, 2.0], &g), Err(Error::Shape { .. })));
    }

    #[test]
    fn hydrogen_energies() {
        let g = grid();
        let h1 = hydrogenic_orbital(1.0, 1, 0, &g).unwrap();
        assert!((energy(&h1, 1.0, &g) + 0.5).abs() < 5e-4);
        let g2 = make_grid(0.5e-6, 50.0, 2000).unwrap();
        let he = hydrogenic_orbital(2.0, 1, 0, &g2).unwrap();
        assert!((energy(&he, 2.0, &g2) + 2.0).abs() < 2e-3);
    }

    #[test]
    fn node_counts() {
        let g = grid();
        for (n, l) in [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2), (4, 0)] {
            let o = hydrogenic_orbital(1.0, n, l, &g).unwrap();
            assert_eq!(o.node_count(), n - l - 1, "{n}{l}");
        }
    }

    #[test]
    fn invalid_quantum_numbers() {
        let g = grid();
        assert!(hydrogenic_orbital(1.0, 0, 0, &g).is_err());
        assert!(hydrogenic_orbital(1.0, 2, 2, &g).is_err());
        assert!(hydrogenic_orbital(0.0, 1, 0, &g).is_err());
    }

    #[test]
    fn kinetic_virial() {
        let g = grid();
        let o = hydrogenic_orbital(1.0, 1, 0, &g).unwrap();
        let t = kinetic_apply(&o, &g).unwrap();
        assert!((g.inner(&o.u, &t) - 0.5).abs() < 1e-3);
    }

    #[test]
    fn kinetic_zero_and_capacity() {
        let g = grid();
        let z = RadialOrbital {
            u: vec![0.0; g.len()],
            n: 1,
            l: 0,
            spin: OrbitalSpin::Up,
            occupation: 1.0,
        };
        assert!(kinetic_apply(&z, &g).unwrap().iter().all(|&x| x == 0.0));
        let small = make_grid(1e-3, 10.0, 10).unwrap();
        let o = RadialOrbital {
            u: vec![0.0; 10],
            ..z
        };
        assert!(matches!(kinetic_apply(&o, &small), Err(Error::Capacity { .. })));
    }

    #[test]
    fn kinetic_is_symmetric() {
        let g = grid();
        let r = g.points();
        let f = |a: f64, p: i32| -> Vec<f64> {
            r.iter().map(|x| x.powi(p) * (-a * x * x).exp()).collect()
        };
        for l in 0..3 {
            let phi = RadialOrbital {
                u: f(0.7, l as i32 + 1),
                n: l + 1,
                l,
                spin: OrbitalSpin::Up,
                occupation: 1.0,
            };
            let psi = RadialOrbital {
                u: f(1.3, l as i32 + 2),
                ..phi.clone()
            };
            let a = g.inner(&phi.u, &kinetic_apply(&psi, &g).unwrap());
            let b = g.inner(&kinetic_apply(&phi, &g).unwrap(), &psi.u);
            assert!((a - b).abs() < 1e-8, "l={l}: {a} vs {b}");
        }
    }

    #[test]
    fn hydrogenic_orthonormal() {
        let g = grid();
        for l in 0..3 {
            let orbs: Vec<_> = ((l + 1)..(l + 4))
                .map(|n| hydrogenic_orbital(2.0, n, l, &g).unwrap())
                .collect();
            for (i, a) in orbs.iter().enumerate() {
                for (j, b) in orbs.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((g.inner(&a.u, &b.u) - expect).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn quadrature_polynomial_exponential_family() {
        let g = grid();
        let r = g.points();
        // ∫ r^k e^{-a r} dr = k! / a^{k+1}
        for k in 0..6 {
            for a in [1.0, 2.0, 3.0] {
                let f: Vec<f64> = r.iter().map(|x| x.powi(k) * (-a * x).exp()).collect();
                let exact = factorial(k as usize) / a.powi(k + 1);
                let got = integrate(&f, &g).unwrap();
                assert!(((got - exact) / exact).abs() < 1e-6, "k={k} a={a}");
            }
        }
    }

    #[test]
    fn laguerre_low_orders() {
        // L_2^1(x) = (x^2 - 6x + 6)/2
        for x in [0.0, 0.5, 2.0, 7.0] {
            assert!((laguerre(2, 1.0, x) - (x * x - 6.0 * x + 6.0) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_dump_format() {
        let g = make_grid(1e-3, 10.0, 20).unwrap();
        let o = hydrogenic_orbital(1.0, 1, 0, &g).unwrap();
        let csv = orbital_csv(&o, &g).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("r,u"));
        let row = lines.next().unwrap();
        let (r, _) = row.split_once(',').unwrap();
        assert_eq!(r.parse::<f64>().unwrap(), g.points()[0]);
        assert_eq!(csv.lines().count(), 21);
    }
}
