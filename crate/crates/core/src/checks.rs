//! Self-checks behind `ribsim validate`: derivative consistency against finite
//! differences, frame invariance, and banded-versus-dense assembly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::{assemble, assemble_dense, total_energy, Physics};
use crate::energy::{CrossSection, ElementContext, EnergyModel, MaterialParams, ModelId};
use crate::error::Result;
use crate::strain_derivatives::{element_derivatives, stencil_dofs};
use crate::kinematics::{ElementStrain, FrameSet, RestConfiguration, StateVector, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Worst observed error against its tolerance.
    pub worst: f64,
    pub tolerance: f64,
}

fn result(name: String, worst: f64, tolerance: f64) -> CheckResult {
    CheckResult { name, passed: worst < tolerance, worst, tolerance }
}

/// Random element strains away from the developable singularity.
fn random_strains(rng: &mut ChaCha8Rng) -> [ElementStrain; 3] {
    std::array::from_fn(|_| {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        ElementStrain {
            eps: rng.gen_range(-1e-3..1e-3),
            kappa1: rng.gen_range(-1e-2..1e-2),
            kappa2: sign * rng.gen_range(2e-2..2e-1),
            tau: rng.gen_range(-5e-2..5e-2),
        }
    })
}

/// Relative FD error of the strain-space gradient and Hessian of element 1.
fn constitutive_errors(model: &EnergyModel, s: &[ElementStrain; 3], ctx: &[ElementContext; 3], sec: &CrossSection, mat: &MaterialParams) -> Result<(f64, f64)> {
    let d = model.element(s, ctx, 1, sec, mat)?;
    let gs = d.grad.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let hs = d.hess.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let (mut eg, mut eh) = (0.0f64, 0.0f64);
    for j in 0..4 {
        let step = 1e-5 * s[1].as_array()[j].abs().max(1e-3);
        let shifted = |delta: f64| {
            let mut t = *s;
            let mut a = t[1].as_array();
            a[j] += delta;
            t[1] = ElementStrain::from_array(a);
            model.element(&t, ctx, 1, sec, mat)
        };
        let (up, dn) = (shifted(step)?, shifted(-step)?);
        eg = eg.max(((up.energy - dn.energy) / (2.0 * step) - d.grad[j]).abs() / gs);
        for i in 0..4 {
            eh = eh.max(((up.grad[i] - dn.grad[i]) / (2.0 * step) - d.hess[i][j]).abs() / hs);
        }
    }
    Ok((eg, eh))
}

fn wavy_state(m: usize, length: f64, rng: &mut ChaCha8Rng) -> Result<(StateVector, FrameSet, RestConfiguration)> {
    let s0 = StateVector::straight(m, length)?;
    let f0 = FrameSet::initialize(&s0)?;
    let rest = RestConfiguration::from_state(&s0, &f0)?;
    let a: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-0.05..0.05) * length);
    let nodes: Vec<Vec3> = (0..m)
        .map(|i| {
            let u = i as f64 / (m - 1) as f64;
            let p = std::f64::consts::PI * u;
            [u * length * 0.95, a[0] * p.sin() + a[1] * (2.0 * p).sin(), 0.1 * length * p.sin() + a[2] * (3.0 * p).sin()]
        })
        .collect();
    let thetas: Vec<f64> = (0..m - 1).map(|i| a[3] * 10.0 * (i as f64 / (m - 1) as f64)).collect();
    let state = StateVector::new(&nodes, &thetas)?;
    let frames = crate::kinematics::update_frames(&f0, &state)?;
    Ok((state, frames, rest))
}

/// One random bent, twisted element: returns its state, base frames and rest data.
fn random_element(rng: &mut ChaCha8Rng) -> Result<(StateVector, FrameSet, RestConfiguration)> {
    let mut edge = || -> Vec3 {
        let len = rng.gen_range(1e-3..4e-3);
        let (a, b): (f64, f64) = (rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6));
        [len * a.cos() * b.cos(), len * a.sin() * b.cos(), len * b.sin()]
    };
    let (e0, e1) = (edge(), edge());
    let base = [0.0; 3];
    let mid = e0;
    let end = [e0[0] + e1[0], e0[1] + e1[1], e0[2] + e1[2]];
    let thetas = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
    let rest_state = StateVector::new(&[base, mid, end], &thetas)?;
    let frames = FrameSet::initialize(&rest_state)?;
    let rest = RestConfiguration::from_state(&rest_state, &frames)?;
    // Move away from the base so transport and twist are non-trivial.
    let mut state = rest_state;
    for (i, q) in state.q.iter_mut().enumerate() {
        *q += if i % 4 == 3 { rng.gen_range(-0.3..0.3) } else { rng.gen_range(-2e-4..2e-4) };
    }
    Ok((state, frames, rest))
}

/// Relative FD errors of the strain Jacobian and Hessian of a random element.
fn strain_map_errors(rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
    let (state, frames, rest) = random_element(rng)?;
    let (_, d) = element_derivatives(&state, &rest, &frames, 0)?;
    let dofs = stencil_dofs(0);
    let (mut ej, mut eh) = (0.0f64, 0.0f64);
    let js: [f64; 4] = std::array::from_fn(|l| d.jacobian[l].iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE));
    let hs: [f64; 4] = std::array::from_fn(|l| d.hessian[l].iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE));
    for (c, &dof) in dofs.iter().enumerate() {
        let step = if dof % 4 == 3 { 1e-6 } else { 1e-9 };
        let shifted = |delta: f64| {
            let mut p = state.clone();
            p.q[dof] += delta;
            element_derivatives(&p, &rest, &frames, 0)
        };
        let ((su, du), (sd, dd)) = (shifted(step)?, shifted(-step)?);
        let (su, sd) = (su.as_array(), sd.as_array());
        for l in 0..4 {
            ej = ej.max(((su[l] - sd[l]) / (2.0 * step) - d.jacobian[l][c]).abs() / js[l]);
            for r in 0..dofs.len() {
                eh = eh.max(((du.jacobian[l][r] - dd.jacobian[l][r]) / (2.0 * step) - d.hessian[l][r][c]).abs() / hs[l]);
            }
        }
    }
    Ok((ej, eh))
}

/// Worst constitutive `(gradient, Hessian)` FD errors over `samples` admissible strain states.
pub fn constitutive_check(id: ModelId, samples: usize, rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
    let mat = MaterialParams::default();
    let sec = CrossSection { width: 1e-2 / 1.2, thickness: 1e-3 };
    let model = EnergyModel::new(id);
    let (mut eg, mut eh) = (0.0f64, 0.0f64);
    let mut n = 0;
    while n < samples {
        let s = random_strains(rng);
        let dl = rng.gen_range(1e-3..4e-3);
        let ctx = [ElementContext { voronoi_length: dl, rest_edge_length: dl, natural: [0.0; 3] }; 3];
        match constitutive_errors(&model, &s, &ctx, &sec, &mat) {
            Ok((g, h)) => {
                eg = eg.max(g);
                eh = eh.max(h);
                n += 1;
            }
            Err(_) => continue, // outside the model's admissible set
        }
    }
    Ok((eg, eh))
}

/// Worst strain `(Jacobian, Hessian)` FD errors over `samples` random elements.
pub fn strain_map_check(samples: usize, rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
    let (mut ej, mut eh) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let (j, h) = strain_map_errors(rng)?;
        ej = ej.max(j);
        eh = eh.max(h);
    }
    Ok((ej, eh))
}

/// Runs every check with a fixed seed.
pub fn run_all(seed: u64, samples: usize) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ej, eh) = strain_map_check(samples, &mut rng)?;
    let mut out = vec![
        result("strain Jacobian vs FD".into(), ej, 1e-6),
        result("strain Hessian vs FD".into(), eh, 1e-5),
    ];
    for id in ModelId::ALL {
        let (eg, eh) = constitutive_check(id, samples, &mut rng)?;
        out.push(result(format!("{id}: constitutive gradient vs FD"), eg, 1e-7));
        out.push(result(format!("{id}: constitutive Hessian vs FD"), eh, 1e-6));
    }

    let mat = MaterialParams::default();
    let sec = CrossSection { width: 1e-2 / 1.2, thickness: 1e-3 };
    let (state, frames, rest) = wavy_state(30, 0.1, &mut rng)?;
    for id in ModelId::ALL {
        let model = EnergyModel::new(id);
        let phys = Physics { rest: &rest, model: &model, section: &sec, material: &mat };
        let e0 = total_energy(&state, &frames, &phys)?;
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let (r, t) = random_rigid_motion(&mut rng);
            let moved = rigidly_moved(&state, &r, &t)?;
            let mframes = crate::kinematics::FrameSet {
                tangents: frames.tangents.iter().map(|v| rotate(&r, v)).collect(),
                d1: frames.d1.iter().map(|v| rotate(&r, v)).collect(),
                d2: frames.d2.iter().map(|v| rotate(&r, v)).collect(),
                m1: frames.m1.iter().map(|v| rotate(&r, v)).collect(),
                m2: frames.m2.iter().map(|v| rotate(&r, v)).collect(),
                ref_twist: frames.ref_twist.clone(),
            };
            let e1 = total_energy(&moved, &mframes, &phys)?;
            worst = worst.max((e1 - e0).abs() / e0.abs().max(f64::MIN_POSITIVE));
        }
        out.push(result(format!("{id}: energy invariant under rigid motion"), worst, 1e-10));
    }

    for m in [5, 8] {
        let (state, frames, rest) = wavy_state(m, 0.02, &mut rng)?;
        for id in ModelId::ALL {
            let model = EnergyModel::new(id);
            let phys = Physics { rest: &rest, model: &model, section: &sec, material: &mat };
            let a = assemble(&state, &frames, &phys)?;
            let (_, f, k) = assemble_dense(&state, &frames, &phys)?;
            let ks = k.amax().max(f64::MIN_POSITIVE);
            let fs = f.iter().fold(0.0f64, |x, v| x.max(v.abs())).max(f64::MIN_POSITIVE);
            let mut worst = 0.0f64;
            for i in 0..state.n_dof() {
                worst = worst.max((a.force[i] - f[i]).abs() / fs);
                for j in 0..state.n_dof() {
                    worst = worst.max((a.stiffness.get(i, j) - k[(i, j)]).abs() / ks);
                }
            }
            out.push(result(format!("{id}: banded equals dense assembly (M={m})"), worst, 1e-10));

            let (mut ef, mut ek) = (0.0f64, 0.0f64);
            for j in 0..state.n_dof() {
                let step = if j % 4 == 3 { 1e-6 } else { 1e-8 };
                let shifted = |delta: f64| -> Result<(f64, Vec<f64>)> {
                    let mut p = state.clone();
                    p.q[j] += delta;
                    // Base frames stay frozen, as within one Newton solve.
                    let (e, f, _) = assemble_dense(&p, &frames, &phys)?;
                    Ok((e, f))
                };
                let ((eu, fu), (ed, fd)) = (shifted(step)?, shifted(-step)?);
                ef = ef.max((-(eu - ed) / (2.0 * step) - f[j]).abs() / fs);
                for i in 0..state.n_dof() {
                    ek = ek.max((-(fu[i] - fd[i]) / (2.0 * step) - k[(i, j)]).abs() / ks);
                }
            }
            out.push(result(format!("{id}: assembled force vs FD of energy (M={m})"), ef, 1e-5));
            out.push(result(format!("{id}: assembled stiffness vs FD of force (M={m})"), ek, 1e-5));
        }
    }
    Ok(out)
}

type Rot = [[f64; 3]; 3];

fn rotate(r: &Rot, v: &Vec3) -> Vec3 {
    std::array::from_fn(|i| r[i][0] * v[0] + r[i][1] * v[1] + r[i][2] * v[2])
}

fn random_rigid_motion(rng: &mut ChaCha8Rng) -> (Rot, Vec3) {
    // Unit quaternion from four normals.
    let mut q: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    q.iter_mut().for_each(|x| *x /= n);
    let [w, x, y, z] = q;
    let r = [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ];
    (r, std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
}

fn rigidly_moved(s: &StateVector, r: &Rot, t: &Vec3) -> Result<StateVector> {
    let nodes: Vec<Vec3> = (0..s.n_nodes())
        .map(|i| {
            let p = rotate(r, &s.node(i));
            [p[0] + t[0], p[1] + t[1], p[2] + t[2]]
        })
        .collect();
    let thetas: Vec<f64> = (0..s.n_nodes() - 1).map(|i| s.theta(i)).collect();
    StateVector::new(&nodes, &thetas)
}
