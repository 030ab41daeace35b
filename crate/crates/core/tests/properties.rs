#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;
use ribsim_core::assembly::{assemble, Physics};
use ribsim_core::banded::BandedSystem;
use ribsim_core::cli_io::compare_runs;
use ribsim_core::energy::{CrossSection, ElementContext, EnergyModel, MaterialParams, ModelId};
use ribsim_core::integrator::{robust_solve, SolveOptions, SolvePath};
use ribsim_core::kinematics::{
    curvature_binormal, element_strains, norm, parallel_transport, update_frames, ElementStrain, FrameSet, RestConfiguration, StateVector,
    Vec3,
};
use ribsim_core::scenarios::{detect_transitions, Trace, TraceRecord};
use ribsim_core::strain_derivatives::element_derivatives;

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    [-r..r, -r..r, -r..r]
}

fn unit(v: Vec3) -> Vec3 {
    let n = norm(&v);
    [v[0] / n, v[1] / n, v[2] / n]
}

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn model() -> impl Strategy<Value = ModelId> {
    prop::sample::select(ModelId::ALL.to_vec())
}

/// A bent, twisted `m`-node strip with frames transported from the straight state.
fn strip(m: usize, amps: &[f64; 5]) -> (StateVector, FrameSet, RestConfiguration) {
    let l = 0.05;
    let s0 = StateVector::straight(m, l).unwrap();
    let f0 = FrameSet::initialize(&s0).unwrap();
    let rest = RestConfiguration::from_state(&s0, &f0).unwrap();
    let pi = std::f64::consts::PI;
    let nodes: Vec<Vec3> = (0..m)
        .map(|i| {
            let u = i as f64 / (m - 1) as f64;
            [(1.0 - amps[0].abs()) * l * u, l * amps[1] * (pi * u).sin(), l * (0.1 * (pi * u).sin() + amps[2] * (2.0 * pi * u).sin())]
        })
        .collect();
    let thetas: Vec<f64> = (0..m - 1).map(|i| amps[3] * i as f64 + amps[4] * (i as f64).sin()).collect();
    let s = StateVector::new(&nodes, &thetas).unwrap();
    let f = update_frames(&f0, &s).unwrap();
    (s, f, rest)
}

fn amps() -> impl Strategy<Value = [f64; 5]> {
    [0.0..0.05, -0.05..0.05, -0.03..0.03, -0.1..0.1, -0.2..0.2]
}

fn rotation(q: [f64; 4]) -> [[f64; 3]; 3] {
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let [w, x, y, z] = q.map(|v| v / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

fn rot(r: &[[f64; 3]; 3], v: &Vec3) -> Vec3 {
    std::array::from_fn(|i| dot(&r[i], v))
}

fn orthonormality_error(f: &FrameSet) -> f64 {
    let mut worst = 0.0f64;
    for e in 0..f.tangents.len() {
        let (t, d1, d2) = (&f.tangents[e], &f.d1[e], &f.d2[e]);
        for (a, b, want) in [(t, t, 1.0), (d1, d1, 1.0), (d2, d2, 1.0), (t, d1, 0.0), (t, d2, 0.0), (d1, d2, 0.0)] {
            worst = worst.max((dot(a, b) - want).abs());
        }
    }
    worst
}

fn synthetic_trace(x: &[f64], f: &[f64]) -> Trace {
    Trace {
        records: x
            .iter()
            .zip(f)
            .enumerate()
            .map(|(i, (&control, &shear_force))| TraceRecord { control, height: 0.0, shear_force, energy: 0.0, step: i })
            .collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transport_preserves_norm(v in vec3(10.0), a in vec3(1.0), b in vec3(1.0)) {
        prop_assume!(norm(&a) > 1e-3 && norm(&b) > 1e-3);
        let (ta, tb) = (unit(a), unit(b));
        prop_assume!(dot(&ta, &tb) > -0.999);
        let w = parallel_transport(&v, &ta, &tb).unwrap();
        prop_assert!((norm(&w) - norm(&v)).abs() <= 1e-12 * norm(&v).max(1.0));
    }

    #[test]
    fn collinear_edges_have_zero_binormal(d in vec3(1.0), k in -8i32..8) {
        prop_assume!(norm(&d) > 1e-3);
        // Power-of-two scaling keeps the edges exactly parallel in floating point.
        let e0 = d;
        let e1 = d.map(|x| x * 2f64.powi(k));
        prop_assert_eq!(curvature_binormal(&e0, &e1).unwrap(), [0.0; 3]);
    }

    #[test]
    fn strains_are_rigid_motion_invariant(amps in amps(), q in [-1.0..1.0f64, -1.0..1.0, -1.0..1.0, -1.0..1.0], c in vec3(1.0)) {
        prop_assume!(q.iter().map(|v| v * v).sum::<f64>() > 1e-2);
        let (s, f, rest) = strip(12, &amps);
        let r = rotation(q);
        let nodes: Vec<Vec3> = (0..s.n_nodes()).map(|i| {
            let p = rot(&r, &s.node(i));
            [p[0] + c[0], p[1] + c[1], p[2] + c[2]]
        }).collect();
        let thetas: Vec<f64> = (0..s.n_nodes() - 1).map(|i| s.theta(i)).collect();
        let moved = StateVector::new(&nodes, &thetas).unwrap();
        let map = |v: &[Vec3]| v.iter().map(|x| rot(&r, x)).collect::<Vec<_>>();
        let g = FrameSet { tangents: map(&f.tangents), d1: map(&f.d1), d2: map(&f.d2), m1: map(&f.m1), m2: map(&f.m2), ref_twist: f.ref_twist.clone() };
        let a = element_strains(&s, &rest, &f).unwrap();
        let b = element_strains(&moved, &rest, &g).unwrap();
        let scale = a.iter().flat_map(|e| e.as_array()).fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.iter().zip(&b) {
            for (u, v) in x.as_array().iter().zip(y.as_array()) {
                prop_assert!((u - v).abs() <= 1e-10 * scale, "{u} vs {v}");
            }
        }
    }

    #[test]
    fn frames_stay_orthonormal(steps in prop::collection::vec(amps(), 1..6)) {
        let (_, mut f, _) = strip(10, &steps[0]);
        for a in &steps {
            let (s, _, _) = strip(10, a);
            f = update_frames(&f, &s).unwrap();
            prop_assert!(orthonormality_error(&f) < 1e-10);
        }
    }

    #[test]
    fn strain_hessian_slices_are_symmetric(amps in amps(), e in 0usize..8) {
        let (s, f, rest) = strip(10, &amps);
        let (_, d) = element_derivatives(&s, &rest, &f, e).unwrap();
        for h in &d.hessian {
            let scale = h.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
            for i in 0..11 {
                for j in 0..11 {
                    prop_assert!((h[i][j] - h[j][i]).abs() <= 1e-12 * scale);
                }
            }
        }
        // ε depends only on the owning edge (element e + 1's leading edge).
        for c in [0, 1, 2, 9, 10] {
            prop_assert_eq!(d.jacobian[0][c], 0.0);
        }
    }

    #[test]
    fn energies_are_even_and_vanish_at_rest(
        id in model(),
        eps in -1e-3..1e-3f64,
        k1 in -1e-2..1e-2f64,
        k2 in 2e-2..0.2f64,
        tau in -5e-2..5e-2f64,
    ) {
        let sec = CrossSection { width: 1e-2 / 1.2, thickness: 1e-3 };
        let mat = MaterialParams::default();
        let m = EnergyModel::new(id);
        let ctx = [ElementContext { voronoi_length: 2.5e-3, rest_edge_length: 2.5e-3, natural: [0.0; 3] }; 3];
        let zero = [ElementStrain { eps: 0.0, kappa1: 0.0, kappa2: 0.0, tau: 0.0 }; 3];
        if let Ok(d) = m.element(&zero, &ctx, 1, &sec, &mat) {
            prop_assert_eq!(d.energy, 0.0);
        }
        let s = [ElementStrain { eps, kappa1: k1, kappa2: k2, tau }; 3];
        let flipped = [ElementStrain { eps, kappa1: k1, kappa2: -k2, tau: -tau }; 3];
        let (Ok(a), Ok(b)) = (m.element(&s, &ctx, 1, &sec, &mat), m.element(&flipped, &ctx, 1, &sec, &mat)) else {
            return Ok(()); // outside the admissible set
        };
        prop_assert!((a.energy - b.energy).abs() <= 1e-12 * a.energy.abs());
        let scale = a.hess.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..4 {
            for j in 0..4 {
                prop_assert!((a.hess[i][j] - a.hess[j][i]).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn assembled_stiffness_symmetric_and_forces_balanced(id in model(), amps in amps()) {
        let (s, f, rest) = strip(12, &amps);
        let sec = CrossSection { width: 4e-3, thickness: 1e-3 };
        let mat = MaterialParams::default();
        let model = EnergyModel::new(id);
        let phys = Physics { rest: &rest, model: &model, section: &sec, material: &mat };
        let Ok(a) = assemble(&s, &f, &phys) else { return Ok(()) };
        prop_assert!(a.stiffness.asymmetry() < 1e-9);
        let scale = a.force.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for axis in 0..3 {
            let total: f64 = (0..s.n_nodes()).map(|i| a.force[4 * i + axis]).sum();
            prop_assert!(total.abs() <= 1e-9 * scale, "axis {axis}: {total}");
        }
    }

    #[test]
    fn regularized_solution_solves_shifted_system(d in prop::collection::vec(1e-3..1.0f64, 12), r in prop::collection::vec(-1.0..1.0f64, 12)) {
        // One exactly singular direction and a tight condition limit force the Tikhonov path.
        let mut j = BandedSystem::from_diagonal(&d);
        j.set(0, 0, 0.0);
        for i in 2..12 {
            j.set(i, i - 1, 1e-2);
            j.set(i - 1, i, 1e-2);
        }
        let opts = SolveOptions { k_max: 1e8, lambda0_rel: 1e-6, regularized_residual_tol: f64::INFINITY, ..SolveOptions::default() };
        let out = robust_solve(&j, &r, &opts).unwrap();
        prop_assume!(out.path == SolvePath::Regularized);
        let mut shifted = j.clone();
        shifted.add_diagonal(out.lambda);
        let res: f64 = shifted.matvec(&out.dq).iter().zip(&r).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(res <= 1e-8 * rn);
    }

    #[test]
    fn detector_recovers_synthetic_peak(peak in 0.05..0.45f64, width in 0.02..0.2f64) {
        let x: Vec<f64> = (0..=500).map(|i| i as f64 * 1e-3).collect();
        let f: Vec<f64> = x.iter().map(|&x| (-(x - peak).powi(2) / (2.0 * width * width)).exp()).collect();
        let t = detect_transitions(&x, &f);
        prop_assert!((t.first.unwrap() - peak).abs() <= 1e-3 + 1e-12);
    }

    #[test]
    fn self_comparison_is_exactly_zero(peak in 0.1..0.3f64, valley in 0.32..0.45f64) {
        let x: Vec<f64> = (0..=500).map(|i| i as f64 * 1e-3).collect();
        let f: Vec<f64> = x.iter().map(|&x| if x < peak { x } else if x < valley { 2.0 * peak - x } else { x - 2.0 * (valley - peak) }).collect();
        let t = synthetic_trace(&x, &f);
        let rep = compare_runs(&t, &t, None).unwrap();
        prop_assert_eq!(rep.u_to_us.shift_pct, Some(0.0));
        prop_assert_eq!(rep.us_to_s.shift_pct, Some(0.0));
    }
}
