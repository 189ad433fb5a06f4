//! Hole energies, frozen-atom level shifts and the Phillips-Kleinman
//! frozen-core pseudopotential.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hfcore::{dot_t, SCFState};
use crate::radial::{count_nodes, kinetic_apply_raw, RadialGrid, RadialOrbital};

/// Work to move an electron from level `i` into level `j`: `-(ε_j - ε_i)`.
pub fn hole_energy(eigs: &[f64], j: usize, i: usize) -> Result<f64> {
    let get = |k: usize, name: &str| {
        eigs.get(k).copied().ok_or_else(|| {
            Error::param(name, format!("index {k} out of range for {} levels", eigs.len()))
        })
    };
    Ok(-(get(j, "j")? - get(i, "i")?))
}

/// `values[(j, i)] = -(ε_j - ε_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HoleEnergyMatrix {
    pub values: DMatrix<f64>,
}

impl HoleEnergyMatrix {
    pub fn from_eigenvalues(eigs: &[f64]) -> Self {
        let n = eigs.len();
        HoleEnergyMatrix {
            values: DMatrix::from_fn(n, n, |j, i| -(eigs[j] - eigs[i])),
        }
    }
}

/// Level shift `ε_i - ε_j` carried by projector `j` when orbital `i` is
/// polarized in a frozen atom.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelShift {
    pub level: String,
    pub shift_hartree: f64,
}

/// Shifts `ε_i - ε_j` for every `j`, from a bare eigenvalue list.
pub fn level_shifts(eigs: &[f64], i: usize) -> Result<Vec<f64>> {
    (0..eigs.len()).map(|j| hole_energy(eigs, j, i)).collect()
}

pub fn frozen_atom_shift(state: &SCFState, m: usize) -> Result<Vec<LevelShift>> {
    if !state.converged {
        return Err(Error::Precondition("frozen-atom shifts need a converged state".into()));
    }
    let shifts = level_shifts(&state.eigenvalues, m)?;
    Ok(state
        .orbitals
        .iter()
        .zip(shifts)
        .map(|(o, s)| LevelShift {
            level: o.label(),
            shift_hartree: s,
        })
        .collect())
}

/// `P = Σ_c |c⟩⟨c|` over orthonormalized core orbitals of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct CoreProjector {
    pub l: usize,
    pub cores: Vec<RadialOrbital>,
    grid: RadialGrid,
}

impl CoreProjector {
    pub fn new(l: usize, cores: Vec<RadialOrbital>, g: &RadialGrid) -> Result<Self> {
        let mut cores = cores;
        for i in 0..cores.len() {
            g.check_len(cores[i].u.len())?;
            if cores[i].l != l {
                return Err(Error::param(
                    "l",
                    format!("core {} is not in channel l = {l}", cores[i].label()),
                ));
            }
            for j in 0..i {
                let c = dot_t(&cores[j].u, &cores[i].u, g);
                let (a, b) = cores.split_at_mut(i);
                for (x, y) in b[0].u.iter_mut().zip(&a[j].u) {
                    *x -= c * y;
                }
            }
            let n = dot_t(&cores[i].u, &cores[i].u, g).sqrt();
            if !(n > 1e-8) {
                return Err(Error::param("cores", "core orbitals are linearly dependent"));
            }
            cores[i].u.iter_mut().for_each(|x| *x /= n);
        }
        Ok(CoreProjector {
            l,
            cores,
            grid: g.clone(),
        })
    }

    pub fn rank(&self) -> usize {
        self.cores.len()
    }

    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.grid.check_len(u.len())?;
        let mut out = vec![0.0; u.len()];
        for c in &self.cores {
            let a = dot_t(&c.u, u, &self.grid);
            for (o, x) in out.iter_mut().zip(&c.u) {
                *o += a * x;
            }
        }
        Ok(out)
    }

    /// Dense projector acting on `y = √(h r) u`, where it is an orthogonal
    /// projection matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.grid.len();
        let mut p = DMatrix::zeros(n, n);
        for c in &self.cores {
            let y = nalgebra::DVector::from_iterator(
                n,
                c.u.iter().zip(self.grid.jacobian()).map(|(u, t)| u * t.sqrt()),
            );
            p.ger(1.0, &y, &y, 1.0);
        }
        p
    }
}

/// `(Pψ, (1 - P)ψ)`.
pub fn core_project(core: &CoreProjector, psi: &RadialOrbital) -> Result<(RadialOrbital, RadialOrbital)> {
    if psi.l != core.l {
        return Err(Error::param(
            "l",
            format!("orbital {} is not in channel l = {}", psi.label(), core.l),
        ));
    }
    let p = core.apply(&psi.u)?;
    let q: Vec<f64> = psi.u.iter().zip(&p).map(|(a, b)| a - b).collect();
    Ok((
        RadialOrbital { u: p, ..psi.clone() },
        RadialOrbital { u: q, ..psi.clone() },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoreCoefficient {
    pub core: String,
    pub coefficient: f64,
}

/// Pseudo-valence orbital `ψ_v + Σ_c a_c ψ_c`. It is not normalized: the
/// valence component has unit weight.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoOrbital {
    pub valence: RadialOrbital,
    pub u: Vec<f64>,
    pub eigenvalue: f64,
    pub eigenvalue_allelectron: f64,
    pub core_coefficients: Vec<CoreCoefficient>,
    /// Outermost node of the all-electron valence orbital (0 when nodeless).
    pub core_radius: f64,
    pub node_count: usize,
    pub allelectron_node_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PseudoReport {
    pub valence: String,
    pub eigenvalue_allelectron: f64,
    pub eigenvalue_pk: f64,
    pub node_count: usize,
    pub core_coefficients: Vec<CoreCoefficient>,
}

impl PseudoOrbital {
    pub fn report(&self) -> PseudoReport {
        PseudoReport {
            valence: self.valence.label(),
            eigenvalue_allelectron: self.eigenvalue_allelectron,
            eigenvalue_pk: self.eigenvalue,
            node_count: self.node_count,
            core_coefficients: self.core_coefficients.clone(),
        }
    }
}

fn outermost_node(u: &[f64], g: &RadialGrid) -> f64 {
    let peak = u.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let floor = 1e-6 * peak;
    let r = g.points();
    let mut last: Option<(usize, f64)> = None;
    let mut node = 0.0;
    for (i, &x) in u.iter().enumerate() {
        if x.abs() <= floor {
            continue;
        }
        if let Some((j, y)) = last {
            if x.signum() != y.signum() {
                // Linear interpolation between the bracketing samples.
                node = r[j] + (r[i] - r[j]) * y / (y - x);
            }
        }
        last = Some((i, x));
    }
    node
}

/// Solves `[F + Σ_c (ε_v - ε_c)|c⟩⟨c|] ψ = ε ψ` in the valence channel.
///
/// The shifted operator has `ε_v` as its lowest eigenvalue with multiplicity
/// `1 + #cores`. Within that eigenspace the returned orbital is the
/// combination of least kinetic energy.
pub fn pk_solve(state: &SCFState, valence: (usize, usize)) -> Result<PseudoOrbital> {
    if !state.converged {
        return Err(Error::Precondition("pseudopotential needs a converged state".into()));
    }
    let (n, l) = valence;
    let v = state.shell_index(n, l).ok_or_else(|| {
        Error::param("valence", format!("level ({n}, {l}) is not in the configuration"))
    })?;
    let g = &state.grid;
    let eps_v = state.eigenvalues[v];
    let mut core_idx: Vec<usize> = (0..state.orbitals.len())
        .filter(|&c| state.orbitals[c].l == l && state.orbitals[c].n < n)
        .collect();
    core_idx.sort_by_key(|&c| state.orbitals[c].n);
    if core_idx.len() != n - l - 1 {
        return Err(Error::param(
            "valence",
            format!(
                "every lower level of channel l = {l} must be an occupied core level below {}",
                state.orbitals[v].label()
            ),
        ));
    }

    let field = state.field()?;
    let mut op = field.channel(l, g)?;
    for &c in &core_idx {
        op.add_level_shift(eps_v - state.eigenvalues[c], &state.orbitals[c].u);
    }
    let mut guesses = vec![state.orbitals[v].u.clone()];
    guesses.extend(core_idx.iter().map(|&c| state.orbitals[c].u.clone()));
    let (values, vectors) = op.lowest(guesses.len(), &guesses)?;
    if let Some(bad) = values.iter().find(|e| (*e - eps_v).abs() > 1e-6) {
        return Err(Error::Internal(format!(
            "shifted operator has eigenvalue {bad} away from the valence level {eps_v}"
        )));
    }

    // Least kinetic energy within the degenerate eigenspace.
    let m = vectors.len();
    let tv: Vec<Vec<f64>> = vectors
        .iter()
        .map(|u| kinetic_apply_raw(u, l, g))
        .collect::<Result<_>>()?;
    let mut tm = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            tm[(i, j)] = 0.5 * (dot_t(&vectors[i], &tv[j], g) + dot_t(&vectors[j], &tv[i], g));
        }
    }
    let eig = SymmetricEigen::new(tm);
    let lowest = eig.eigenvalues.imin();
    let mut smooth = vec![0.0; g.len()];
    for (i, u) in vectors.iter().enumerate() {
        let s = eig.eigenvectors[(i, lowest)];
        for (o, x) in smooth.iter_mut().zip(u) {
            *o += s * x;
        }
    }

    // Express the result on the all-electron orbitals with unit valence weight.
    let ae = &state.orbitals[v];
    let wv = dot_t(&ae.u, &smooth, g);
    if wv.abs() < 1e-8 {
        return Err(Error::Internal("pseudo-orbital has no valence component".into()));
    }
    let mut u = ae.u.clone();
    let mut coeffs = Vec::with_capacity(core_idx.len());
    for &c in &core_idx {
        let core = &state.orbitals[c];
        let a = dot_t(&core.u, &smooth, g) / wv;
        for (o, x) in u.iter_mut().zip(&core.u) {
            *o += a * x;
        }
        coeffs.push(CoreCoefficient {
            core: core.label(),
            coefficient: a,
        });
    }

    let yu = op.to_y(&u);
    let fy = op.apply(&yu);
    let num: f64 = yu.iter().zip(&fy).map(|(a, b)| a * b).sum();
    let den: f64 = yu.iter().map(|a| a * a).sum();

    Ok(PseudoOrbital {
        valence: ae.clone(),
        node_count: count_nodes(&u),
        allelectron_node_count: ae.node_count(),
        core_radius: outermost_node(&ae.u, g),
        u,
        eigenvalue: num / den,
        eigenvalue_allelectron: eps_v,
        core_coefficients: coeffs,
    })
}
