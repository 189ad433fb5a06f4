//! Radial Coulomb kernels and angular coupling.

use crate::error::{Error, Result};
use crate::radial::RadialGrid;

/// Largest orbital angular momentum with a coupling table.
pub const MAX_COUPLED_L: usize = 3;

/// `Y_k(f)(r_i) = Σ_j t_j f_j r_<^k / r_>^{k+1}` with `t = h r`.
///
/// Evaluated with two running sums, so the cost is linear in the grid size
/// and the discrete kernel is exactly symmetric under `i <-> j`.
pub fn slater_potential(k: usize, f: &[f64], g: &RadialGrid) -> Result<Vec<f64>> {
    g.check_len(f.len())?;
    let r = g.points();
    let t = g.jacobian();
    let n = r.len();
    let mut inner = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..n {
        if i > 0 {
            acc *= (r[i - 1] / r[i]).powi(k as i32 + 1);
        }
        acc += t[i] * f[i] / r[i];
        inner[i] = acc;
    }
    let mut out = inner;
    let mut acc = 0.0;
    for i in (0..n.saturating_sub(1)).rev() {
        acc = (acc + t[i + 1] * f[i + 1] / r[i + 1]) * (r[i] / r[i + 1]).powi(k as i32);
        out[i] += acc;
    }
    Ok(out)
}

/// `Σ t_i a_i b_i`, the inner product in which all operators are symmetric.
pub(crate) fn dot_t(a: &[f64], b: &[f64], g: &RadialGrid) -> f64 {
    a.iter()
        .zip(b)
        .zip(g.jacobian())
        .map(|((x, y), t)| x * y * t)
        .sum()
}

/// Slater integral `R^k(ab; cd) = ∫∫ a(1) c(1) r_<^k/r_>^{k+1} b(2) d(2)`.
pub fn slater_integral(k: usize, a: &[f64], c: &[f64], b: &[f64], d: &[f64], g: &RadialGrid) -> Result<f64> {
    let bd: Vec<f64> = b.iter().zip(d).map(|(x, y)| x * y).collect();
    let y = slater_potential(k, &bd, g)?;
    let ac: Vec<f64> = a.iter().zip(c).map(|(x, y)| x * y).collect();
    Ok(dot_t(&ac, &y, g))
}

fn fact(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Square of the 3j symbol `(l1 l2 l3; 0 0 0)`; zero outside the triangle or
/// for odd `l1 + l2 + l3`.
pub fn three_j_squared(l1: usize, l2: usize, l3: usize) -> Result<f64> {
    let lmax = l1.max(l3);
    if lmax > MAX_COUPLED_L {
        return Err(Error::Capacity {
            what: "angular momentum in coupling table",
            value: lmax,
            limit: MAX_COUPLED_L,
        });
    }
    let j = l1 + l2 + l3;
    if j % 2 == 1 || l2 > l1 + l3 || l1 > l2 + l3 || l3 > l1 + l2 {
        return Ok(0.0);
    }
    let p = j / 2;
    let a = fact(j - 2 * l1) * fact(j - 2 * l2) * fact(j - 2 * l3) / fact(j + 1);
    let b = fact(p) / (fact(p - l1) * fact(p - l2) * fact(p - l3));
    Ok(a * b * b)
}

/// Multipoles `k` and weights with which a shell `(l_c, q_c)` exchanges with
/// channel `l`.
///
/// Other channels contribute their majority-spin electron count times the
/// squared 3j symbol. A shell in the same channel contributes one electron
/// at `k = 0`, which removes its own share of the direct potential, and the
/// spherically averaged own-shell pairs at `k > 0`. The result is exact for
/// closed shells and for any single electron.
pub fn exchange_weights(l: usize, l_c: usize, q_c: f64) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    for k in l.abs_diff(l_c)..=(l + l_c) {
        let c = three_j_squared(l, k, l_c)?;
        if c == 0.0 {
            continue;
        }
        let w = if l_c != l {
            q_c.min((2 * l_c + 1) as f64) * c
        } else if k == 0 {
            q_c.min(1.0)
        } else {
            (q_c - 1.0).max(0.0) * (2 * l + 1) as f64 / (4 * l + 1) as f64 * c
        };
        if w != 0.0 {
            out.push((k, w));
        }
    }
    Ok(out)
}
