//! Constitutive laws in strain space.
//!
//! Each model maps an element strain `[ε, κ1, κ2, τ]` (and, for the non-local
//! developable model, the neighbouring `κ2, τ`) to an energy with its exact
//! strain-space gradient and Hessian. Bending–twist couplings are written once
//! against [`Real`] and differentiated with jets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RibError};
use crate::jet::{Jet, Real};
use crate::kinematics::ElementStrain;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum ModelId {
    Kirchhoff,
    Sadowsky,
    Sano,
    Audoly,
    Wunderlich,
}

impl ModelId {
    pub const ALL: [ModelId; 5] =
        [ModelId::Kirchhoff, ModelId::Sadowsky, ModelId::Sano, ModelId::Audoly, ModelId::Wunderlich];

    pub fn name(&self) -> &'static str {
        match self {
            ModelId::Kirchhoff => "kirchhoff",
            ModelId::Sadowsky => "sadowsky",
            ModelId::Sano => "sano",
            ModelId::Audoly => "audoly",
            ModelId::Wunderlich => "wunderlich",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = RibError;
    fn from_str(s: &str) -> Result<Self> {
        ModelId::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| RibError::Schema {
                path: "model".into(),
                message: format!("unknown model `{s}` (expected one of kirchhoff, sadowsky, sano, audoly, wunderlich)"),
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub youngs_modulus: f64,
    pub shear_modulus: f64,
    pub poisson_ratio: f64,
    pub density: f64,
}

impl MaterialParams {
    /// Isotropic material; the shear modulus follows from `Y` and `ν`.
    pub fn isotropic(youngs_modulus: f64, poisson_ratio: f64, density: f64) -> Self {
        MaterialParams {
            youngs_modulus,
            shear_modulus: youngs_modulus / (2.0 * (1.0 + poisson_ratio)),
            poisson_ratio,
            density,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.youngs_modulus > 0.0
            && self.shear_modulus > 0.0
            && self.poisson_ratio > -1.0
            && self.poisson_ratio <= 0.5
            && self.density > 0.0;
        if ok {
            Ok(())
        } else {
            Err(RibError::InvalidInput(format!("material parameters out of range: {self:?}")))
        }
    }
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams::isotropic(10e9, 0.5, 1000.0)
    }
}

/// Rectangular section of width `W` and thickness `b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    pub width: f64,
    pub thickness: f64,
}

impl CrossSection {
    pub fn new(width: f64, thickness: f64) -> Result<Self> {
        if !(width > thickness && thickness > 0.0) {
            return Err(RibError::InvalidInput(format!("need W > b > 0 (W = {width}, b = {thickness})")));
        }
        Ok(CrossSection { width, thickness })
    }
    pub fn area(&self) -> f64 {
        self.width * self.thickness
    }
    /// Stiff in-plane bending moment of area `bW³/12`.
    pub fn i1(&self) -> f64 {
        self.thickness * self.width.powi(3) / 12.0
    }
    /// Easy out-of-plane bending moment of area `Wb³/12`.
    pub fn i2(&self) -> f64 {
        self.width * self.thickness.powi(3) / 12.0
    }
    pub fn torsion_constant(&self) -> f64 {
        self.width * self.thickness.powi(3) / 3.0
    }
    pub fn sano_zeta(&self, nu: f64) -> f64 {
        ((1.0 - nu) * self.width.powi(4) / (60.0 * self.thickness * self.thickness)).sqrt()
    }
    pub fn audoly_kappa_star(&self, nu: f64) -> f64 {
        self.thickness / ((12.0 * (1.0 - nu * nu)).sqrt() * self.width * self.width)
    }
}

/// Rest data an element energy needs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementContext {
    /// Voronoi length `Δl` of the element's node.
    pub voronoi_length: f64,
    /// Rest length `ē` of the edge whose stretch the element owns.
    pub rest_edge_length: f64,
    /// Natural `[κ̄1, κ̄2, τ̄]`.
    pub natural: [f64; 3],
}

/// Gradient and Hessian of one element energy with respect to a neighbour's strain.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NeighborBlock {
    pub grad: [f64; 4],
    pub hess: [[f64; 4]; 4],
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StrainSpaceDerivatives {
    pub energy: f64,
    pub grad: [f64; 4],
    pub hess: [[f64; 4]; 4],
    /// `∂E_k/∂ε_{k-1}` and `∂E_k/∂ε_{k+1}` (non-local model only).
    pub prev: Option<NeighborBlock>,
    pub next: Option<NeighborBlock>,
}

/// Selected constitutive law plus its numerical guards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub id: ModelId,
    /// Regulariser of the `1/Δκ2²` singularity (Sadowsky and Wunderlich).
    pub regularization: f64,
    /// Below this `|Δκ2|` the unregularised Wunderlich law refuses to evaluate.
    pub kappa_guard: f64,
    /// Margin below the `|Wη'| = 2` generator limit.
    pub overrun_guard: f64,
}

impl EnergyModel {
    pub fn new(id: ModelId) -> Self {
        EnergyModel { id, regularization: 1e-8, kappa_guard: 1e-10, overrun_guard: 1e-6 }
    }

    pub fn is_nonlocal(&self) -> bool {
        self.id == ModelId::Wunderlich
    }

    /// Energy of element `k` given all element strains.
    pub fn element(
        &self,
        strains: &[ElementStrain],
        ctx: &[ElementContext],
        k: usize,
        section: &CrossSection,
        material: &MaterialParams,
    ) -> Result<StrainSpaceDerivatives> {
        let (s, c) = (&strains[k], &ctx[k]);
        match self.id {
            ModelId::Kirchhoff => Ok(kirchhoff_energy(s, c, section, material)),
            ModelId::Sadowsky => Ok(sadowsky_energy(s, c, section, material, self.regularization)),
            ModelId::Sano => Ok(sano_energy(s, c, section, material)),
            ModelId::Audoly => Ok(audoly_energy(s, c, section, material)),
            ModelId::Wunderlich => wunderlich_energy(strains, ctx, k, section, material, self),
        }
    }
}

/// Stretching of one edge, `½ EA ε² ē`, as `(energy, dE/dε, d²E/dε²)`.
pub fn stretch_energy(eps: f64, rest_length: f64, section: &CrossSection, material: &MaterialParams) -> (f64, f64, f64) {
    let k = material.youngs_modulus * section.area() * rest_length;
    (0.5 * k * eps * eps, k * eps, k)
}

/// The four decoupled quadratic terms; the basis every model builds on.
pub fn kirchhoff_energy(
    s: &ElementStrain,
    c: &ElementContext,
    section: &CrossSection,
    material: &MaterialParams,
) -> StrainSpaceDerivatives {
    let y = material.youngs_modulus;
    let dl = c.voronoi_length;
    let k = [
        y * section.area() * c.rest_edge_length,
        y * section.i1() / dl,
        y * section.i2() / dl,
        material.shear_modulus * section.torsion_constant() / dl,
    ];
    let d = deviation(s, c);
    let mut out = StrainSpaceDerivatives::default();
    for i in 0..4 {
        out.energy += 0.5 * k[i] * d[i] * d[i];
        out.grad[i] = k[i] * d[i];
        out.hess[i][i] = k[i];
    }
    out
}

#[inline]
fn deviation(s: &ElementStrain, c: &ElementContext) -> [f64; 4] {
    [s.eps, s.kappa1 - c.natural[0], s.kappa2 - c.natural[1], s.tau - c.natural[2]]
}

/// Adds a coupling `f(Δκ2, Δτ)` evaluated on jets to `out`.
fn add_coupling<F>(out: &mut StrainSpaceDerivatives, dk: f64, dt: f64, f: F)
where
    F: Fn(Jet<2>, Jet<2>) -> Jet<2>,
{
    let j = f(Jet::var(dk, 0), Jet::var(dt, 1));
    out.energy += j.v;
    for a in 0..2 {
        out.grad[2 + a] += j.g[a];
        for b in 0..2 {
            out.hess[2 + a][2 + b] += j.h[a][b];
        }
    }
}

pub fn sadowsky_energy(
    s: &ElementStrain,
    c: &ElementContext,
    section: &CrossSection,
    material: &MaterialParams,
    regularization: f64,
) -> StrainSpaceDerivatives {
    let mut out = kirchhoff_energy(s, c, section, material);
    let d = deviation(s, c);
    let w = 0.5 * material.youngs_modulus * section.i2() / c.voronoi_length;
    add_coupling(&mut out, d[2], d[3], |x, t| sadowsky_coupling(x, t, w, regularization));
    out
}

#[inline]
fn sadowsky_coupling<T: Real>(dk: T, dt: T, w: f64, reg: f64) -> T {
    dt.sq().sq() * w / (dk.sq() + reg)
}

pub fn sano_energy(
    s: &ElementStrain,
    c: &ElementContext,
    section: &CrossSection,
    material: &MaterialParams,
) -> StrainSpaceDerivatives {
    let mut out = kirchhoff_energy(s, c, section, material);
    let d = deviation(s, c);
    let w = 0.5 * material.youngs_modulus * section.i2() / c.voronoi_length;
    let floor = (c.voronoi_length / section.sano_zeta(material.poisson_ratio)).powi(2);
    add_coupling(&mut out, d[2], d[3], |x, t| t.sq().sq() * w / (x.sq() + floor));
    out
}

pub fn audoly_energy(
    s: &ElementStrain,
    c: &ElementContext,
    section: &CrossSection,
    material: &MaterialParams,
) -> StrainSpaceDerivatives {
    let mut out = kirchhoff_energy(s, c, section, material);
    let d = deviation(s, c);
    let nu = material.poisson_ratio;
    let (wd, b, dl) = (section.width, section.thickness, c.voronoi_length);
    let pref = 3.0 * material.youngs_modulus * section.i2() * wd.powi(4) / (b * b * dl.powi(3));
    let vscale = (12.0 * (1.0 - nu * nu)).sqrt() * wd * wd / (b * dl);
    add_coupling(&mut out, d[2], d[3], |x, t| {
        let q = x.sq() * nu + t.sq();
        q.sq() * pref * audoly_phi_generic(x * vscale)
    });
    out
}

/// Even Taylor coefficients of the transition function in powers of `v²`
/// (exact rational series of the removable singularity, rounded to f64).
const PHI_SERIES: [f64; 12] = [
    2.777_777_777_777_778e-3,
    -5.5114638447971785e-6,
    1.1008092191954626e-8,
    -2.1991218643490664e-11,
    4.393287843413538e-14,
    -8.776677243084061e-17,
    1.753358004831772e-19,
    -3.5027655784157057e-22,
    6.997639194987014e-25,
    -1.3979512247400445e-27,
    2.792752773181298e-30,
    -5.5792132901934266e-33,
];

/// Below this `|v|` the series is used (its radius of convergence is ≈ 22).
const PHI_SERIES_LIMIT: f64 = 4.0;

/// Transition function of the wide-ribbon law.
pub fn audoly_phi(v: f64) -> f64 {
    audoly_phi_generic(v)
}

pub fn audoly_phi_generic<T: Real>(v: T) -> T {
    if v.val().abs() < PHI_SERIES_LIMIT {
        let w = v.sq();
        let mut acc = T::cst(PHI_SERIES[PHI_SERIES.len() - 1]);
        for c in PHI_SERIES.iter().rev().skip(1) {
            acc = acc * w + *c;
        }
        acc
    } else {
        let av = if v.val() < 0.0 { -v } else { v };
        let s = (av * 0.5).sqrt();
        // (cosh s − cos s)/(s (sinh s + sin s)) with e^{s} factored out.
        let em = (-s).exp();
        let num = em.sq() + 1.0 - s.cos() * em * 2.0;
        let den = s * (-(em.sq()) + 1.0 + s.sin() * em * 2.0);
        (-(num / den) + 0.5) * 4.0 / v.sq()
    }
}

/// `(1/z) log((1 + z/2)/(1 − z/2))`, with its series near `z = 0`.
fn generator_factor<T: Real>(z: T) -> T {
    if z.val().abs() < 1e-4 {
        let z2 = z.sq();
        z2 * (z2 / 80.0 + 1.0 / 12.0) + 1.0
    } else {
        // log((1 + u)/(1 − u)) = log1p(2u/(1 − u)), u = z/2
        (z / (-(z * 0.5) + 1.0)).ln_1p() / z
    }
}

/// Local developable law with the ruling-rate correction of its neighbours.
///
/// `η = Δτ/Δκ2` and `η' ≈ (Δl/2)[(Δτ_{k+1} − Δτ_{k−1})Δκ2_k − Δτ_k(Δκ2_{k+1} − Δκ2_{k−1})]/Δκ2_k²`
/// (one-sided at the ends). The `1/Δκ2²` divisions carry the same small
/// regulariser as the Sadowsky law; with it set to zero the unregularised
/// law is evaluated and refuses `|Δκ2| < kappa_guard`.
pub fn wunderlich_energy(
    strains: &[ElementStrain],
    ctx: &[ElementContext],
    k: usize,
    section: &CrossSection,
    material: &MaterialParams,
    model: &EnergyModel,
) -> Result<StrainSpaceDerivatives> {
    let n = strains.len();
    let dev = |j: usize| deviation(&strains[j], &ctx[j]);
    let d = dev(k);
    let c = &ctx[k];
    let reg = model.regularization;
    if reg == 0.0 && d[2].abs() < model.kappa_guard {
        return Err(RibError::DivisionGuard { element: k });
    }
    let y = material.youngs_modulus;
    let mut out = StrainSpaceDerivatives::default();
    let (e, de, dde) = stretch_energy(d[0], c.rest_edge_length, section, material);
    let k1 = y * section.i1() / c.voronoi_length;
    out.energy = e + 0.5 * k1 * d[1] * d[1];
    out.grad[0] = de;
    out.hess[0][0] = dde;
    out.grad[1] = k1 * d[1];
    out.hess[1][1] = k1;

    let prev = (k > 0).then(|| dev(k - 1));
    let next = (k + 1 < n).then(|| dev(k + 1));
    // Variables: (κ_{k−1}, τ_{k−1}, κ_k, τ_k, κ_{k+1}, τ_{k+1}); absent neighbours are constants.
    let var = |val: f64, i: usize, present: bool| if present { Jet::<6>::var(val, i) } else { Jet::constant(val) };
    let xp = var(prev.map_or(0.0, |p| p[2]), 0, prev.is_some());
    let tp = var(prev.map_or(0.0, |p| p[3]), 1, prev.is_some());
    let xk = Jet::var(d[2], 2);
    let tk = Jet::var(d[3], 3);
    let xn = var(next.map_or(0.0, |p| p[2]), 4, next.is_some());
    let tn = var(next.map_or(0.0, |p| p[3]), 5, next.is_some());
    let dl = c.voronoi_length;
    let num = match (prev.is_some(), next.is_some()) {
        (true, true) => ((tn - tp) * xk - tk * (xn - xp)) * (0.5 * dl),
        (false, true) => (tn * xk - tk * xn) * dl,
        (true, false) => (tk * xp - tp * xk) * dl,
        (false, false) => Jet::constant(0.0),
    };
    let denom = xk.sq() + reg;
    let eta_prime = num / denom;
    let z = eta_prime * section.width;
    if z.v.abs() >= 2.0 - model.overrun_guard {
        return Err(RibError::GeneratorOverrun { element: k, value: z.v.abs() });
    }
    // [Δκ(1 + η²)]² = Δκ² + (2Δκ²Δτ² + Δτ⁴)/Δκ², regularised in the division only.
    let w = 0.5 * y * section.i2() / dl;
    let bracket = xk.sq() + (xk.sq() * tk.sq() * 2.0 + tk.sq().sq()) / denom;
    let f = bracket * generator_factor(z) * w;

    out.energy += f.v;
    out.grad[2] += f.g[2];
    out.grad[3] += f.g[3];
    for a in 0..2 {
        for b in 0..2 {
            out.hess[2 + a][2 + b] += f.h[2 + a][2 + b];
        }
    }
    let block = |off: usize| {
        let mut nb = NeighborBlock::default();
        for a in 0..2 {
            nb.grad[2 + a] = f.g[off + a];
            for b in 0..2 {
                nb.hess[2 + a][2 + b] = f.h[off + a][off + b];
            }
        }
        nb
    };
    out.prev = prev.map(|_| block(0));
    out.next = next.map(|_| block(4));
    Ok(out)
}
