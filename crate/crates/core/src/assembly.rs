//! Global energy, force and banded stiffness from element contributions, and
//! penalty enforcement of prescribed DOFs.
//!
//! For element `k` with strain Jacobian `G_k` and strain Hessians `H_{ε,k}`:
//! gradient `G_kᵀ ∂E/∂ε_k`, Hessian `G_kᵀ ∇²E G_k + Σ_l (∂E/∂ε_{k,l}) H_{ε,k,l}`.
//! For the non-local law the strain-space derivatives of every `E_j` with
//! respect to `ε_k` are collected on `k` first; blocks coupling two different
//! stencils are dropped. Edge 0 is not owned by any element, so its stretching
//! is added separately.

use nalgebra::DMatrix;

use crate::banded::BandedSystem;
use crate::energy::{stretch_energy, CrossSection, ElementContext, EnergyModel, MaterialParams};
use crate::error::Result;
use crate::kinematics::{sub, norm, FrameSet, RestConfiguration, StateVector, LENGTH_EPSILON};
use crate::par;
use crate::strain_derivatives::{element_derivatives, stencil_dofs, ElementDerivatives, STENCIL};
use crate::RibError;

/// Everything the constitutive evaluation needs besides the configuration.
#[derive(Clone, Copy, Debug)]
pub struct Physics<'a> {
    pub rest: &'a RestConfiguration,
    pub model: &'a EnergyModel,
    pub section: &'a CrossSection,
    pub material: &'a MaterialParams,
}

#[derive(Clone, Debug)]
pub struct Assembled {
    pub energy: f64,
    /// `F = −∇E`.
    pub force: Vec<f64>,
    /// `K = ∇²E`.
    pub stiffness: BandedSystem,
}

pub fn element_contexts(rest: &RestConfiguration) -> Vec<ElementContext> {
    (0..rest.n_elements())
        .map(|e| ElementContext {
            voronoi_length: rest.voronoi_lengths[e],
            rest_edge_length: rest.rest_edge_lengths[e + 1],
            natural: rest.natural_strains[e],
        })
        .collect()
}

struct Local {
    dofs: [usize; STENCIL],
    grad: [f64; STENCIL],
    hess: [[f64; STENCIL]; STENCIL],
}

/// Energy and stencil-local gradients/Hessians of every element.
fn local_contributions(state: &StateVector, frames: &FrameSet, phys: &Physics) -> Result<(f64, Vec<Local>)> {
    let n_el = state.n_nodes() - 2;
    let ctx = element_contexts(phys.rest);
    let derivs: Vec<_> = par::try_map(n_el, |e| element_derivatives(state, phys.rest, frames, e))?;
    let strains: Vec<_> = derivs.iter().map(|(s, _)| *s).collect();
    let ssd = par::try_map(n_el, |e| phys.model.element(&strains, &ctx, e, phys.section, phys.material))?;
    let energy: f64 = ssd.iter().map(|d| d.energy).sum();

    let locals = par::try_map(n_el, |e| {
        let mut g = ssd[e].grad;
        let mut h = ssd[e].hess;
        if phys.model.is_nonlocal() {
            let mut gather = |nb: Option<crate::energy::NeighborBlock>| {
                if let Some(nb) = nb {
                    for a in 0..4 {
                        g[a] += nb.grad[a];
                        for b in 0..4 {
                            h[a][b] += nb.hess[a][b];
                        }
                    }
                }
            };
            if e > 0 {
                gather(ssd[e - 1].next);
            }
            if e + 1 < n_el {
                gather(ssd[e + 1].prev);
            }
        }
        Ok(chain_rule(e, &derivs[e].1, &g, &h))
    })?;
    Ok((energy, locals))
}

fn chain_rule(e: usize, d: &ElementDerivatives, g: &[f64; 4], h: &[[f64; 4]; 4]) -> Local {
    let gk = &d.jacobian;
    let mut grad = [0.0; STENCIL];
    for c in 0..STENCIL {
        grad[c] = (0..4).map(|l| gk[l][c] * g[l]).sum();
    }
    // (∇²E · G) then Gᵀ(∇²E G).
    let mut hg = [[0.0; STENCIL]; 4];
    for a in 0..4 {
        for c in 0..STENCIL {
            hg[a][c] = (0..4).map(|b| h[a][b] * gk[b][c]).sum();
        }
    }
    let mut hess = [[0.0; STENCIL]; STENCIL];
    for r in 0..STENCIL {
        for c in 0..STENCIL {
            let mut v = 0.0;
            for a in 0..4 {
                v += gk[a][r] * hg[a][c] + g[a] * d.hessian[a][r][c];
            }
            hess[r][c] = v;
        }
    }
    Local { dofs: stencil_dofs(e), grad, hess }
}

/// Stretch of edge 0 as (energy, gradient on `[x0, x1]`, 6×6 Hessian).
fn leading_edge(state: &StateVector, phys: &Physics) -> Result<(f64, [f64; 6], [[f64; 6]; 6])> {
    let e = sub(&state.node(1), &state.node(0));
    let l = norm(&e);
    if l < LENGTH_EPSILON {
        return Err(RibError::DegenerateEdge { edge: 0, length: l });
    }
    let lbar = phys.rest.rest_edge_lengths[0];
    let eps = l / lbar - 1.0;
    let (en, de, dde) = stretch_energy(eps, lbar, phys.section, phys.material);
    let t = [e[0] / l, e[1] / l, e[2] / l];
    // dε/de = t/ē, d²ε/de² = (I − ttᵀ)/(ē l)
    let mut ge = [0.0; 3];
    let mut he = [[0.0; 3]; 3];
    for i in 0..3 {
        ge[i] = de * t[i] / lbar;
        for j in 0..3 {
            let proj = if i == j { 1.0 } else { 0.0 } - t[i] * t[j];
            he[i][j] = dde * t[i] * t[j] / (lbar * lbar) + de * proj / (lbar * l);
        }
    }
    let mut g = [0.0; 6];
    let mut h = [[0.0; 6]; 6];
    for i in 0..3 {
        g[i] = -ge[i];
        g[3 + i] = ge[i];
        for j in 0..3 {
            h[i][j] = he[i][j];
            h[3 + i][3 + j] = he[i][j];
            h[i][3 + j] = -he[i][j];
            h[3 + i][j] = -he[i][j];
        }
    }
    Ok((en, g, h))
}

const LEADING_DOFS: [usize; 6] = [0, 1, 2, 4, 5, 6];

/// Total elastic energy only.
pub fn total_energy(state: &StateVector, frames: &FrameSet, phys: &Physics) -> Result<f64> {
    let ctx = element_contexts(phys.rest);
    let strains = crate::kinematics::element_strains(state, phys.rest, frames)?;
    let mut total = 0.0;
    for k in 0..strains.len() {
        total += phys.model.element(&strains, &ctx, k, phys.section, phys.material)?.energy;
    }
    let e = sub(&state.node(1), &state.node(0));
    let lbar = phys.rest.rest_edge_lengths[0];
    total += stretch_energy(norm(&e) / lbar - 1.0, lbar, phys.section, phys.material).0;
    Ok(total)
}

pub fn assemble(state: &StateVector, frames: &FrameSet, phys: &Physics) -> Result<Assembled> {
    let n = state.n_dof();
    let (mut energy, locals) = local_contributions(state, frames, phys)?;
    let mut force = vec![0.0; n];
    let mut k = BandedSystem::zeros(n);
    for loc in &locals {
        for r in 0..STENCIL {
            let gr = loc.dofs[r];
            force[gr] -= loc.grad[r];
            for c in 0..STENCIL {
                k.add(gr, loc.dofs[c], loc.hess[r][c]);
            }
        }
    }
    let (e0, g0, h0) = leading_edge(state, phys)?;
    energy += e0;
    for r in 0..6 {
        force[LEADING_DOFS[r]] -= g0[r];
        for c in 0..6 {
            k.add(LEADING_DOFS[r], LEADING_DOFS[c], h0[r][c]);
        }
    }
    Ok(Assembled { energy, force, stiffness: k })
}

/// Same contributions scattered into a dense matrix (test oracle for the band path).
pub fn assemble_dense(state: &StateVector, frames: &FrameSet, phys: &Physics) -> Result<(f64, Vec<f64>, DMatrix<f64>)> {
    let n = state.n_dof();
    let (mut energy, locals) = local_contributions(state, frames, phys)?;
    let mut force = vec![0.0; n];
    let mut k = DMatrix::zeros(n, n);
    for loc in &locals {
        for r in 0..STENCIL {
            force[loc.dofs[r]] -= loc.grad[r];
            for c in 0..STENCIL {
                k[(loc.dofs[r], loc.dofs[c])] += loc.hess[r][c];
            }
        }
    }
    let (e0, g0, h0) = leading_edge(state, phys)?;
    energy += e0;
    for r in 0..6 {
        force[LEADING_DOFS[r]] -= g0[r];
        for c in 0..6 {
            k[(LEADING_DOFS[r], LEADING_DOFS[c])] += h0[r][c];
        }
    }
    Ok((energy, force, k))
}

/// Prescribed DOF values enforced by a diagonal penalty.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundaryConditions {
    pub fixed: Vec<(usize, f64)>,
    pub penalty: f64,
}

impl BoundaryConditions {
    /// Penalty `factor × max |K_ii|`.
    pub fn with_penalty_from(fixed: Vec<(usize, f64)>, stiffness: &BandedSystem, factor: f64) -> Self {
        let kmax = stiffness.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        BoundaryConditions { fixed, penalty: factor * kmax.max(f64::MIN_POSITIVE) }
    }
}

/// Adds `p` to each fixed diagonal and `p·(prescribed − current)` to its force.
pub fn apply_bc(stiffness: &mut BandedSystem, force: &mut [f64], q: &[f64], bc: &BoundaryConditions) {
    for &(dof, value) in &bc.fixed {
        stiffness.add(dof, dof, bc.penalty);
        force[dof] += bc.penalty * (value - q[dof]);
    }
}
