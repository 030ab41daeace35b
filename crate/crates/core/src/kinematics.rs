//! Centerline geometry, reference/material frames and the four strain measures.
//!
//! DOFs are interleaved `[x0, y0, z0, θ0, x1, y1, z1, θ1, …, x_{M-1}, y_{M-1}, z_{M-1}]`
//! so that one element stencil (three nodes, two edge angles) spans 11 consecutive
//! indices and the global Hessian has half-bandwidth 10.
//!
//! Element `e` sits at interior node `k = e + 1`, couples edges `k-1` and `k`, and
//! owns the axial strain of edge `k`. Curvature and twist are integrated
//! (dimensionless) quantities; energies carry the `1/Δl` factors.

use crate::error::{Result, RibError};
use crate::jet::{Real, V3};

pub const LENGTH_EPSILON: f64 = 1e-12;
pub const ANTIPARALLEL_EPSILON: f64 = 1e-12;

pub type Vec3 = [f64; 3];

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
#[inline]
pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}
#[inline]
pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
#[inline]
pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}
#[inline]
pub fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}
#[inline]
pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn x_dof(node: usize, axis: usize) -> usize {
    4 * node + axis
}
#[inline]
pub fn theta_dof(edge: usize) -> usize {
    4 * edge + 3
}

/// Configuration `q` and its rate `q̇`, both of length `4M − 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
}

impl StateVector {
    pub fn new(nodes: &[Vec3], thetas: &[f64]) -> Result<Self> {
        let m = nodes.len();
        if m < 3 {
            return Err(RibError::InvalidInput(format!("need at least 3 nodes, got {m}")));
        }
        if thetas.len() != m - 1 {
            return Err(RibError::InvalidInput(format!(
                "expected {} twist angles, got {}",
                m - 1,
                thetas.len()
            )));
        }
        let mut q = vec![0.0; 4 * m - 1];
        for (i, p) in nodes.iter().enumerate() {
            q[4 * i..4 * i + 3].copy_from_slice(p);
        }
        for (i, th) in thetas.iter().enumerate() {
            q[theta_dof(i)] = *th;
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(RibError::InvalidInput("non-finite state entry".into()));
        }
        let qdot = vec![0.0; q.len()];
        Ok(StateVector { q, qdot })
    }

    /// `m` nodes evenly spaced along +x over `length`, untwisted.
    pub fn straight(m: usize, length: f64) -> Result<Self> {
        let de = length / (m as f64 - 1.0);
        let nodes: Vec<Vec3> = (0..m).map(|i| [i as f64 * de, 0.0, 0.0]).collect();
        Self::new(&nodes, &vec![0.0; m.saturating_sub(1)])
    }

    pub fn n_nodes(&self) -> usize {
        (self.q.len() + 1) / 4
    }
    pub fn n_dof(&self) -> usize {
        self.q.len()
    }
    #[inline]
    pub fn node(&self, i: usize) -> Vec3 {
        [self.q[4 * i], self.q[4 * i + 1], self.q[4 * i + 2]]
    }
    #[inline]
    pub fn theta(&self, i: usize) -> f64 {
        self.q[theta_dof(i)]
    }
    pub fn set_node(&mut self, i: usize, p: Vec3) {
        self.q[4 * i..4 * i + 3].copy_from_slice(&p);
    }
}

/// Undeformed lengths and natural strains.
#[derive(Clone, Debug, PartialEq)]
pub struct RestConfiguration {
    pub rest_edge_lengths: Vec<f64>,
    pub voronoi_lengths: Vec<f64>,
    /// Per element `[κ̄1, κ̄2, τ̄]`.
    pub natural_strains: Vec<[f64; 3]>,
}

impl RestConfiguration {
    /// Rest lengths and natural strains read off a reference configuration.
    pub fn from_state(state: &StateVector, frames: &FrameSet) -> Result<Self> {
        let m = state.n_nodes();
        let mut lens = Vec::with_capacity(m - 1);
        for i in 0..m - 1 {
            let l = norm(&sub(&state.node(i + 1), &state.node(i)));
            if l < LENGTH_EPSILON {
                return Err(RibError::DegenerateEdge { edge: i, length: l });
            }
            lens.push(l);
        }
        let mut rest = RestConfiguration {
            voronoi_lengths: (0..m - 2).map(|k| 0.5 * (lens[k] + lens[k + 1])).collect(),
            rest_edge_lengths: lens,
            natural_strains: vec![[0.0; 3]; m - 2],
        };
        let strains = element_strains(state, &rest, frames)?;
        rest.natural_strains = strains.iter().map(|s| [s.kappa1, s.kappa2, s.tau]).collect();
        Ok(rest)
    }

    pub fn n_elements(&self) -> usize {
        self.voronoi_lengths.len()
    }
}

/// Per-edge reference and material triads plus per-element reference twist.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSet {
    pub tangents: Vec<Vec3>,
    pub d1: Vec<Vec3>,
    pub d2: Vec<Vec3>,
    pub m1: Vec<Vec3>,
    pub m2: Vec<Vec3>,
    /// `m_ref` at interior node `e + 1`, indexed by element `e`.
    pub ref_twist: Vec<f64>,
}

impl FrameSet {
    /// Space-parallel frames for `state`: the first director is the normalized
    /// projection of the coordinate axis least aligned with the first tangent,
    /// then transported edge to edge. Reference twist starts at zero.
    pub fn initialize(state: &StateVector) -> Result<Self> {
        let edges = edge_vectors(state)?;
        let tangents: Vec<Vec3> = edges.iter().map(|(_, _, t)| *t).collect();
        let t0 = tangents[0];
        let axis = (0..3)
            .min_by(|&a, &b| t0[a].abs().partial_cmp(&t0[b].abs()).unwrap())
            .unwrap();
        let mut e = [0.0; 3];
        e[axis] = 1.0;
        let mut d1 = Vec::with_capacity(tangents.len());
        d1.push(orthonormalize(&e, &t0));
        for i in 1..tangents.len() {
            let u = parallel_transport(&d1[i - 1], &tangents[i - 1], &tangents[i])?;
            d1.push(orthonormalize(&u, &tangents[i]));
        }
        let mut frames = FrameSet {
            d2: tangents.iter().zip(&d1).map(|(t, d)| cross(t, d)).collect(),
            tangents,
            d1,
            m1: Vec::new(),
            m2: Vec::new(),
            ref_twist: vec![0.0; state.n_nodes() - 2],
        };
        frames.refresh_material(state);
        Ok(frames)
    }

    fn refresh_material(&mut self, state: &StateVector) {
        let n = self.tangents.len();
        self.m1.clear();
        self.m2.clear();
        for i in 0..n {
            let (s, c) = state.theta(i).sin_cos();
            let m1 = add(&scale(&self.d1[i], c), &scale(&self.d2[i], s));
            self.m2.push(cross(&self.tangents[i], &m1));
            self.m1.push(m1);
        }
    }

    /// Transport-relevant data of element `e`, frozen for use as a differentiation base.
    pub(crate) fn element_base(&self, e: usize, rest: &RestConfiguration) -> ElementBase {
        ElementBase {
            ta: self.tangents[e],
            tb: self.tangents[e + 1],
            d1a: self.d1[e],
            d1b: self.d1[e + 1],
            mref: self.ref_twist[e],
            rest_len: rest.rest_edge_lengths[e + 1],
            node: e + 1,
        }
    }
}

fn orthonormalize(v: &Vec3, t: &Vec3) -> Vec3 {
    let p = sub(v, &scale(t, dot(v, t)));
    scale(&p, 1.0 / norm(&p))
}

/// Edge `i` of the centerline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeQuantity {
    pub edge: Vec3,
    pub length: f64,
    pub tangent: Vec3,
    pub strain: f64,
}

fn edge_vectors(state: &StateVector) -> Result<Vec<(Vec3, f64, Vec3)>> {
    let m = state.n_nodes();
    if m < 3 {
        return Err(RibError::InvalidInput(format!("need at least 3 nodes, got {m}")));
    }
    (0..m - 1)
        .map(|i| {
            let e = sub(&state.node(i + 1), &state.node(i));
            let l = norm(&e);
            if l < LENGTH_EPSILON {
                return Err(RibError::DegenerateEdge { edge: i, length: l });
            }
            Ok((e, l, scale(&e, 1.0 / l)))
        })
        .collect()
}

pub fn edge_quantities(state: &StateVector, rest: &RestConfiguration) -> Result<Vec<EdgeQuantity>> {
    Ok(edge_vectors(state)?
        .into_iter()
        .zip(&rest.rest_edge_lengths)
        .map(|((edge, length, tangent), &lbar)| EdgeQuantity {
            edge,
            length,
            tangent,
            strain: length / lbar - 1.0,
        })
        .collect())
}

/// Minimal rotation taking `t_from` to `t_to`, applied to `v`.
pub fn parallel_transport(v: &Vec3, t_from: &Vec3, t_to: &Vec3) -> Result<Vec3> {
    let c = dot(t_from, t_to);
    if c <= -1.0 + ANTIPARALLEL_EPSILON {
        return Err(RibError::AntiparallelTangents);
    }
    let b = cross(t_from, t_to);
    let bv = dot(&b, v);
    let bxv = cross(&b, v);
    Ok([
        c * v[0] + bxv[0] + bv * b[0] / (1.0 + c),
        c * v[1] + bxv[1] + bv * b[1] / (1.0 + c),
        c * v[2] + bxv[2] + bv * b[2] / (1.0 + c),
    ])
}

/// Transport of a director `v ⟂ t_from` onto `t_to` (orthogonal-input shortcut of
/// the Rodrigues rotation), generic so it can be differentiated.
#[inline]
fn transport_perp<T: Real>(v: &V3<T>, t_from: &V3<T>, t_to: &V3<T>) -> V3<T> {
    let c = t_from.dot(t_to) + 1.0;
    let s = t_to.dot(v) / c;
    v.sub(&t_from.add(t_to).scale(s))
}

/// Time-parallel transport of `prev` onto the tangents of `state`, with material
/// directors from the current angles and history-consistent reference twist.
pub fn update_frames(prev: &FrameSet, state: &StateVector) -> Result<FrameSet> {
    let edges = edge_vectors(state)?;
    let n = edges.len();
    if n != prev.tangents.len() {
        return Err(RibError::InvalidInput("frame/state size mismatch".into()));
    }
    let mut tangents = Vec::with_capacity(n);
    let mut d1 = Vec::with_capacity(n);
    for i in 0..n {
        let t = edges[i].2;
        let u = parallel_transport(&prev.d1[i], &prev.tangents[i], &t)?;
        d1.push(orthonormalize(&u, &t));
        tangents.push(t);
    }
    let mut ref_twist = Vec::with_capacity(n - 1);
    for e in 0..n - 1 {
        ref_twist.push(reference_twist(&d1[e], &d1[e + 1], &tangents[e], &tangents[e + 1], prev.ref_twist[e])?);
    }
    let mut frames = FrameSet {
        d2: tangents.iter().zip(&d1).map(|(t, d)| cross(t, d)).collect(),
        tangents,
        d1,
        m1: Vec::new(),
        m2: Vec::new(),
        ref_twist,
    };
    frames.refresh_material(state);
    Ok(frames)
}

fn reference_twist(d1a: &Vec3, d1b: &Vec3, ta: &Vec3, tb: &Vec3, old: f64) -> Result<f64> {
    if dot(ta, tb) <= -1.0 + ANTIPARALLEL_EPSILON {
        return Err(RibError::AntiparallelTangents);
    }
    let v = |a: &Vec3| V3::<f64>::from_f64(*a);
    Ok(reference_twist_generic(&v(d1a), &v(d1b), &v(ta), &v(tb), old))
}

/// Signed angle about `tb` from the space-transported `d1a` to `d1b`, kept on the
/// branch closest to `old`.
#[inline]
fn reference_twist_generic<T: Real>(d1a: &V3<T>, d1b: &V3<T>, ta: &V3<T>, tb: &V3<T>, old: f64) -> T {
    let u = transport_perp(d1a, ta, tb);
    let (s, c) = old.sin_cos();
    let ur = u.scale(T::cst(c)).add(&tb.cross(&u).scale(T::cst(s)));
    let sin = ur.cross(d1b).dot(tb);
    let cos = ur.dot(d1b);
    sin.atan2(cos) + old
}

/// Strains of one element `[ε, κ1, κ2, τ]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ElementStrain {
    pub eps: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub tau: f64,
}

impl ElementStrain {
    pub fn as_array(&self) -> [f64; 4] {
        [self.eps, self.kappa1, self.kappa2, self.tau]
    }
    pub fn from_array(a: [f64; 4]) -> Self {
        ElementStrain { eps: a[0], kappa1: a[1], kappa2: a[2], tau: a[3] }
    }
}

/// Frozen frame data of one element at the last converged configuration.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ElementBase {
    pub ta: Vec3,
    pub tb: Vec3,
    pub d1a: Vec3,
    pub d1b: Vec3,
    pub mref: f64,
    pub rest_len: f64,
    pub node: usize,
}

/// Element strains as a function of the two edge vectors and the two edge angles.
///
/// Directors are transported from the frozen base tangents onto the current
/// ones, so the map is a genuine function of the DOFs and can be differentiated
/// exactly; at the base configuration the transport is the identity.
pub(crate) fn strain_generic<T: Real>(
    e0: &V3<T>,
    e1: &V3<T>,
    th0: T,
    th1: T,
    base: &ElementBase,
) -> Result<[T; 4]> {
    let l0 = e0.norm();
    let l1 = e1.norm();
    if l0.val() < LENGTH_EPSILON {
        return Err(RibError::DegenerateEdge { edge: base.node - 1, length: l0.val() });
    }
    if l1.val() < LENGTH_EPSILON {
        return Err(RibError::DegenerateEdge { edge: base.node, length: l1.val() });
    }
    let denom = l0 * l1 + e0.dot(e1);
    if denom.val() < ANTIPARALLEL_EPSILON * l0.val() * l1.val() {
        return Err(RibError::AntiparallelEdges { node: base.node });
    }
    let t0 = e0.scale(l0.recip());
    let t1 = e1.scale(l1.recip());
    let ta = V3::from_f64(base.ta);
    let tb = V3::from_f64(base.tb);
    if ta.dot(&t0).val() <= -1.0 + ANTIPARALLEL_EPSILON || tb.dot(&t1).val() <= -1.0 + ANTIPARALLEL_EPSILON {
        return Err(RibError::AntiparallelTangents);
    }
    let d1a = transport_perp(&V3::from_f64(base.d1a), &ta, &t0);
    let d1b = transport_perp(&V3::from_f64(base.d1b), &tb, &t1);
    let d2a = t0.cross(&d1a);
    let d2b = t1.cross(&d1b);
    let (s0, c0) = (th0.sin(), th0.cos());
    let (s1, c1) = (th1.sin(), th1.cos());
    // m1 = c d1 + s d2, m2 = t × m1 = c d2 − s d1
    let m1a = d1a.scale(c0).add(&d2a.scale(s0));
    let m1b = d1b.scale(c1).add(&d2b.scale(s1));
    let m2a = d2a.scale(c0).sub(&d1a.scale(s0));
    let m2b = d2b.scale(c1).sub(&d1b.scale(s1));
    let kb = e0.cross(e1).scale(denom.recip() * 2.0);
    let kappa1 = m2a.add(&m2b).dot(&kb) * 0.5;
    let kappa2 = -(m1a.add(&m1b).dot(&kb) * 0.5);
    let mref = reference_twist_generic(&d1a, &d1b, &t0, &t1, base.mref);
    let tau = th1 - th0 + mref;
    let eps = l1 / base.rest_len - 1.0;
    Ok([eps, kappa1, kappa2, tau])
}

/// Curvature binormal `κb = 2 e0×e1 / (|e0||e1| + e0·e1)` at one node.
pub fn curvature_binormal(e0: &Vec3, e1: &Vec3) -> Result<Vec3> {
    let l0 = norm(e0);
    let l1 = norm(e1);
    let denom = l0 * l1 + dot(e0, e1);
    if denom < ANTIPARALLEL_EPSILON * l0 * l1 {
        return Err(RibError::AntiparallelEdges { node: 0 });
    }
    Ok(scale(&cross(e0, e1), 2.0 / denom))
}

#[inline]
pub(crate) fn element_edges(state: &StateVector, e: usize) -> (Vec3, Vec3) {
    let (a, b, c) = (state.node(e), state.node(e + 1), state.node(e + 2));
    (sub(&b, &a), sub(&c, &b))
}

pub fn element_strains(
    state: &StateVector,
    rest: &RestConfiguration,
    frames: &FrameSet,
) -> Result<Vec<ElementStrain>> {
    let m = state.n_nodes();
    (0..m - 2)
        .map(|e| {
            let (e0, e1) = element_edges(state, e);
            let base = frames.element_base(e, rest);
            let s = strain_generic(
                &V3::from_f64(e0),
                &V3::from_f64(e1),
                state.theta(e),
                state.theta(e + 1),
                &base,
            )?;
            Ok(ElementStrain::from_array(s))
        })
        .collect()
}
