//! Exact first and second derivatives of element strains with respect to the
//! 11 stencil DOFs `[x_{k-1}(3), x_k(3), x_{k+1}(3), θ^{k-1}, θ^k]`.
//!
//! The strain map is evaluated on second-order jets seeded in the 8 intrinsic
//! variables `(e^{k-1}, e^k, θ^{k-1}, θ^k)` and pulled back linearly to the stencil.

use crate::error::Result;
use crate::jet::{Jet, V3};
use crate::kinematics::{element_edges, strain_generic, ElementStrain, FrameSet, RestConfiguration, StateVector};

pub const STENCIL: usize = 11;

pub type StrainJacobian = [[f64; STENCIL]; 4];
pub type StrainHessian = [[[f64; STENCIL]; STENCIL]; 4];

#[derive(Clone, Debug, PartialEq)]
pub struct ElementDerivatives {
    pub jacobian: StrainJacobian,
    pub hessian: StrainHessian,
}

/// Global DOF indices of the stencil of element `e`, in local order.
#[inline]
pub fn stencil_dofs(e: usize) -> [usize; STENCIL] {
    let b = 4 * e;
    [b, b + 1, b + 2, b + 4, b + 5, b + 6, b + 8, b + 9, b + 10, b + 3, b + 7]
}

/// Intrinsic variables feeding each stencil column, with their ±1 weights.
const COLUMN_MAP: [[(usize, f64); 2]; STENCIL] = [
    [(0, -1.0), (0, 0.0)],
    [(1, -1.0), (1, 0.0)],
    [(2, -1.0), (2, 0.0)],
    [(0, 1.0), (3, -1.0)],
    [(1, 1.0), (4, -1.0)],
    [(2, 1.0), (5, -1.0)],
    [(3, 1.0), (3, 0.0)],
    [(4, 1.0), (4, 0.0)],
    [(5, 1.0), (5, 0.0)],
    [(6, 1.0), (6, 0.0)],
    [(7, 1.0), (7, 0.0)],
];

fn element_jets(state: &StateVector, rest: &RestConfiguration, frames: &FrameSet, e: usize) -> Result<[Jet<8>; 4]> {
    let (e0, e1) = element_edges(state, e);
    let base = frames.element_base(e, rest);
    let v0 = V3::new(Jet::var(e0[0], 0), Jet::var(e0[1], 1), Jet::var(e0[2], 2));
    let v1 = V3::new(Jet::var(e1[0], 3), Jet::var(e1[1], 4), Jet::var(e1[2], 5));
    strain_generic(&v0, &v1, Jet::var(state.theta(e), 6), Jet::var(state.theta(e + 1), 7), &base)
}

/// Strain values, 4×11 Jacobian and 4×11×11 Hessian of element `e`.
pub fn element_derivatives(
    state: &StateVector,
    rest: &RestConfiguration,
    frames: &FrameSet,
    e: usize,
) -> Result<(ElementStrain, ElementDerivatives)> {
    let jets = element_jets(state, rest, frames, e)?;
    let mut jacobian = [[0.0; STENCIL]; 4];
    let mut hessian = [[[0.0; STENCIL]; STENCIL]; 4];
    for (l, j) in jets.iter().enumerate() {
        // Gradient and Hessian rows in intrinsic variables, folded onto stencil columns.
        let mut hc = [[0.0; STENCIL]; 8];
        for c in 0..STENCIL {
            let [(a, wa), (b, wb)] = COLUMN_MAP[c];
            jacobian[l][c] = wa * j.g[a] + wb * j.g[b];
            for r in 0..8 {
                hc[r][c] = wa * j.h[r][a] + wb * j.h[r][b];
            }
        }
        for r in 0..STENCIL {
            let [(a, wa), (b, wb)] = COLUMN_MAP[r];
            for c in 0..STENCIL {
                hessian[l][r][c] = wa * hc[a][c] + wb * hc[b][c];
            }
        }
    }
    let strain = ElementStrain::from_array([jets[0].v, jets[1].v, jets[2].v, jets[3].v]);
    Ok((strain, ElementDerivatives { jacobian, hessian }))
}

pub fn strain_jacobian(state: &StateVector, rest: &RestConfiguration, frames: &FrameSet, e: usize) -> Result<StrainJacobian> {
    Ok(element_derivatives(state, rest, frames, e)?.1.jacobian)
}

pub fn strain_hessian(state: &StateVector, rest: &RestConfiguration, frames: &FrameSet, e: usize) -> Result<StrainHessian> {
    Ok(element_derivatives(state, rest, frames, e)?.1.hessian)
}
