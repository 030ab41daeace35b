//! Adaptive implicit Euler with Newton iterations and a regularised banded solve.
//!
//! Each step solves `r(q) = M(q − q_n) − h M q̇_n − h² (F_int(q) + F_ext) = 0`
//! with `J = M + h² K`. A step that fails to converge is retried at half the
//! size (never below `h_min`); a step that converges in few iterations with a
//! small final increment lets the size grow by 1.5 (never above `h_max`).

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::assembly::{apply_bc, assemble, BoundaryConditions, Physics};
use crate::banded::BandedSystem;
use crate::energy::{CrossSection, EnergyModel, MaterialParams};
use crate::error::{Result, RibError};
use crate::kinematics::{update_frames, FrameSet, RestConfiguration, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub h: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Force-residual tolerance (N), measured on `r/h²` over free DOFs.
    pub delta_f: f64,
    /// Increment-rate tolerance `‖Δq‖∞/h` (m/s).
    pub delta_u: f64,
    /// Final-increment threshold for growing the step (m).
    pub delta_stable: f64,
    pub n_stable: usize,
    pub max_newton_iters: usize,
    pub shrink: f64,
    pub grow: f64,
    /// `λ₀ = lambda0_rel · ‖J‖₁`.
    pub lambda0_rel: f64,
    pub k_max: f64,
    /// Penalty = factor × largest stiffness diagonal at the start of the step.
    pub penalty_factor: f64,
}

impl SolverSettings {
    /// Defaults with the force tolerance scaled to `Y·b³`.
    pub fn for_ribbon(material: &MaterialParams, section: &CrossSection) -> Self {
        SolverSettings {
            delta_f: 1e-6 * material.youngs_modulus * section.thickness.powi(3),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.h_min
            && self.h_min <= self.h
            && self.h <= self.h_max
            && self.delta_f > 0.0
            && self.delta_u > 0.0
            && self.delta_stable > 0.0
            && self.shrink < 1.0
            && self.shrink > 0.0
            && self.grow > 1.0
            && self.k_max > 1.0
            && self.max_newton_iters > 0;
        if ok {
            Ok(())
        } else {
            Err(RibError::InvalidInput(format!("inconsistent solver settings: {self:?}")))
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions { k_max: self.k_max, lambda0_rel: self.lambda0_rel, ..SolveOptions::default() }
    }
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            h: 1e-2,
            h_min: 1e-6,
            h_max: 1e-2,
            delta_f: 1e-5,
            delta_u: 1e-8,
            delta_stable: 1e-6,
            n_stable: 5,
            max_newton_iters: 50,
            shrink: 0.5,
            grow: 1.5,
            lambda0_rel: 1e-12,
            k_max: 1e12,
            penalty_factor: 1e10,
        }
    }
}

/// Diagonal lumped mass.
#[derive(Clone, Debug, PartialEq)]
pub struct MassMatrix {
    pub diag: Vec<f64>,
}

impl MassMatrix {
    /// `ρAΔl` per node (half an edge at the ends) and `ρ(I1 + I2)ē` per edge angle.
    pub fn lumped(rest: &RestConfiguration, section: &CrossSection, material: &MaterialParams) -> Self {
        let lens = &rest.rest_edge_lengths;
        let m = lens.len() + 1;
        let rho = material.density;
        let mut diag = vec![0.0; 4 * m - 1];
        for i in 0..m {
            let share = match i {
                0 => 0.5 * lens[0],
                _ if i == m - 1 => 0.5 * lens[m - 2],
                _ => 0.5 * (lens[i - 1] + lens[i]),
            };
            for a in 0..3 {
                diag[4 * i + a] = rho * section.area() * share;
            }
        }
        for (i, l) in lens.iter().enumerate() {
            diag[4 * i + 3] = rho * (section.i1() + section.i2()) * l;
        }
        MassMatrix { diag }
    }
}

/// `M(q − q_n) − h M q̇_n − h² (F_int + F_ext)`.
pub fn newton_step_residual(
    q: &[f64],
    q_prev: &[f64],
    qdot_prev: &[f64],
    h: f64,
    mass: &MassMatrix,
    f_int: &[f64],
    f_ext: &[f64],
) -> Vec<f64> {
    (0..q.len())
        .map(|i| mass.diag[i] * (q[i] - q_prev[i] - h * qdot_prev[i]) - h * h * (f_int[i] + f_ext[i]))
        .collect()
}

/// `J = M + h² K − h² ∂F_ext/∂q` with `K = ∇²E`.
pub fn newton_jacobian(mass: &MassMatrix, stiffness: &BandedSystem, h: f64, ext_jacobian: Option<&BandedSystem>) -> BandedSystem {
    let mut j = stiffness.clone();
    j.scale(h * h);
    if let Some(ext) = ext_jacobian {
        j.axpby(1.0, -h * h, ext);
    }
    for (i, m) in mass.diag.iter().enumerate() {
        j.add(i, i, *m);
    }
    j
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolvePath {
    Direct,
    Regularized,
    PseudoInverse,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub k_max: f64,
    pub lambda0_rel: f64,
    pub max_escalations: usize,
    /// A regularised solution is accepted only if `‖J Δq − r‖ ≤ tol · ‖r‖`;
    /// otherwise the regularisation dominates and the pseudo-inverse is used.
    pub regularized_residual_tol: f64,
    /// Symmetric Jacobi scaling `D J D` before the condition test.
    pub equilibrate: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { k_max: 1e12, lambda0_rel: 1e-12, max_escalations: 24, regularized_residual_tol: 1e-3, equilibrate: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutcome {
    pub dq: Vec<f64>,
    pub path: SolvePath,
    pub lambda: f64,
    pub condition: f64,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Direct banded LU when `cond₁(J) < K_max`; otherwise Tikhonov `J + λI` with
/// `λ ← 10λ` from `λ₀`; otherwise a truncated-SVD pseudo-inverse.
pub fn robust_solve(j: &BandedSystem, r: &[f64], opts: &SolveOptions) -> Result<SolveOutcome> {
    let n = j.n();
    let mut a = j.clone();
    let mut rhs = r.to_vec();
    let mut s = vec![1.0; n];
    if opts.equilibrate {
        for (i, d) in a.diagonal().iter().enumerate() {
            if d.abs() > 0.0 && d.is_finite() {
                s[i] = 1.0 / d.abs().sqrt();
            }
        }
        a.scale_symmetric(&s);
        for i in 0..n {
            rhs[i] *= s[i];
        }
    }
    let unscale = |x: Vec<f64>| -> Vec<f64> { x.iter().zip(&s).map(|(v, si)| v * si).collect() };

    let anorm = a.norm1();
    let lu = a.factor();
    let cond = anorm * lu.inverse_norm1_estimate();
    if cond < opts.k_max {
        let mut x = rhs.clone();
        lu.solve(&mut x);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(SolveOutcome { dq: unscale(x), path: SolvePath::Direct, lambda: 0.0, condition: cond });
        }
    }

    let rnorm = norm2(&rhs);
    let mut lambda = opts.lambda0_rel * anorm;
    for _ in 0..opts.max_escalations {
        let mut reg = a.clone();
        reg.add_diagonal(lambda);
        let lu = reg.factor();
        let c = reg.norm1() * lu.inverse_norm1_estimate();
        if c < opts.k_max {
            let mut x = rhs.clone();
            lu.solve(&mut x);
            let ax = a.matvec(&x);
            let res: Vec<f64> = ax.iter().zip(&rhs).map(|(p, q)| p - q).collect();
            if x.iter().all(|v| v.is_finite()) && norm2(&res) <= opts.regularized_residual_tol * rnorm {
                return Ok(SolveOutcome { dq: unscale(x), path: SolvePath::Regularized, lambda, condition: c });
            }
            break;
        }
        lambda *= 10.0;
    }

    let dense = a.to_dense();
    let svd = dense.svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, v| m.max(*v));
    let cutoff = smax / opts.k_max;
    let (u, vt) = match (&svd.u, &svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(RibError::SolveFailed),
    };
    let b = DVector::from_vec(rhs);
    let ub = u.transpose() * b;
    let mut coef = DVector::zeros(ub.len());
    for (i, sv) in svd.singular_values.iter().enumerate() {
        if *sv > cutoff && *sv > 0.0 {
            coef[i] = ub[i] / sv;
        }
    }
    let x: Vec<f64> = (vt.transpose() * coef).iter().copied().collect();
    if x.iter().all(|v| v.is_finite()) && smax > 0.0 {
        Ok(SolveOutcome { dq: unscale(x), path: SolvePath::PseudoInverse, lambda, condition: f64::INFINITY })
    } else {
        Err(RibError::SolveFailed)
    }
}

/// Prescribed DOF values and dead loads as functions of time.
pub trait Loading {
    fn prescribed(&self, t: f64) -> Vec<(usize, f64)>;
    fn external_force(&self, _t: f64, _f: &mut [f64]) {}
}

/// No constraints, no loads.
pub struct Unloaded;

impl Loading for Unloaded {
    fn prescribed(&self, _t: f64) -> Vec<(usize, f64)> {
        Vec::new()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub h: f64,
    pub iterations: usize,
    pub residual: f64,
    pub lambda: f64,
    /// Wall-clock time of the converged attempt.
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub steps: usize,
    pub iterations: usize,
    pub rejected: usize,
    /// Every attempted step size, in order.
    pub attempted_h: Vec<f64>,
    pub records: Vec<StepRecord>,
    /// Wall-clock time of each Newton iteration (assembly through update) of
    /// accepted steps.
    pub iteration_seconds: Vec<f64>,
    pub regularized_solves: usize,
    pub pseudo_inverse_solves: usize,
}

struct Converged {
    q: Vec<f64>,
    iterations: usize,
    residual: f64,
    lambda: f64,
    last_increment: f64,
    energy: f64,
    elastic_force: Vec<f64>,
    residual_history: Vec<f64>,
    iteration_seconds: Vec<f64>,
}

/// Time integrator owning the configuration and its frames.
#[derive(Clone, Debug)]
pub struct Simulator {
    pub state: StateVector,
    pub frames: FrameSet,
    pub rest: RestConfiguration,
    pub model: EnergyModel,
    pub section: CrossSection,
    pub material: MaterialParams,
    pub mass: MassMatrix,
    pub settings: SolverSettings,
    pub t: f64,
    pub h: f64,
    pub diagnostics: Diagnostics,
    /// Elastic energy and force at the last converged configuration.
    pub energy: f64,
    pub elastic_force: Vec<f64>,
    /// Newton residual norms of the last accepted step.
    pub last_residuals: Vec<f64>,
    /// Whether Newton systems are Jacobi-equilibrated before the condition test.
    pub equilibrate: bool,
}

impl Simulator {
    pub fn new(
        state: StateVector,
        rest: RestConfiguration,
        frames: FrameSet,
        model: EnergyModel,
        section: CrossSection,
        material: MaterialParams,
        settings: SolverSettings,
    ) -> Result<Self> {
        settings.validate()?;
        material.validate()?;
        let mass = MassMatrix::lumped(&rest, &section, &material);
        let n = state.n_dof();
        let mut sim = Simulator {
            state,
            frames,
            rest,
            model,
            section,
            material,
            mass,
            h: settings.h,
            settings,
            t: 0.0,
            diagnostics: Diagnostics::default(),
            energy: 0.0,
            elastic_force: vec![0.0; n],
            last_residuals: Vec::new(),
            equilibrate: true,
        };
        let a = assemble(&sim.state, &sim.frames, &sim.physics())?;
        sim.energy = a.energy;
        sim.elastic_force = a.force;
        Ok(sim)
    }

    pub fn physics(&self) -> Physics<'_> {
        Physics { rest: &self.rest, model: &self.model, section: &self.section, material: &self.material }
    }

    /// Changes the cross-section (mass follows).
    pub fn set_section(&mut self, section: CrossSection) {
        self.section = section;
        self.mass = MassMatrix::lumped(&self.rest, &self.section, &self.material);
    }

    /// Newton solve of one step of size `h`; `None` when it does not converge.
    fn attempt(&self, h: f64, loading: &dyn Loading) -> Result<Option<Converged>> {
        let s = &self.settings;
        let t1 = self.t + h;
        let fixed = loading.prescribed(t1);
        let n = self.state.n_dof();
        let mut is_fixed = vec![false; n];
        for (d, _) in &fixed {
            is_fixed[*d] = true;
        }
        let q_prev = &self.state.q;
        let v_prev = &self.state.qdot;
        let mut q: Vec<f64> = (0..n).map(|i| q_prev[i] + h * v_prev[i]).collect();
        for &(d, v) in &fixed {
            q[d] = v;
        }
        let mut f_ext = vec![0.0; n];
        loading.external_force(t1, &mut f_ext);
        let phys = self.physics();
        let opts = SolveOptions { equilibrate: self.equilibrate, ..s.solve_options() };

        let mut bc = BoundaryConditions { fixed, penalty: 0.0 };
        let mut last_inc: Option<f64> = None;
        let mut lambda_max: f64 = 0.0;
        let mut history = Vec::new();
        let mut timings = Vec::new();
        for it in 0..=s.max_newton_iters {
            let clock = std::time::Instant::now();
            let mut trial = self.state.clone();
            trial.q.clone_from(&q);
            let a = match assemble(&trial, &self.frames, &phys) {
                Ok(a) => a,
                Err(_) => return Ok(None),
            };
            if it == 0 {
                bc = BoundaryConditions::with_penalty_from(std::mem::take(&mut bc.fixed), &a.stiffness, s.penalty_factor);
            }
            let elastic = a.force.clone();
            let mut k = a.stiffness;
            let mut f = a.force;
            apply_bc(&mut k, &mut f, &q, &bc);
            let r = newton_step_residual(&q, q_prev, v_prev, h, &self.mass, &f, &f_ext);
            let rn = (0..n).filter(|i| !is_fixed[*i]).map(|i| r[i] * r[i]).sum::<f64>().sqrt() / (h * h);
            history.push(rn);
            if !rn.is_finite() {
                return Ok(None);
            }
            let converged = rn < s.delta_f || last_inc.is_some_and(|d| d / h < s.delta_u);
            if converged {
                return Ok(Some(Converged {
                    q,
                    iterations: it,
                    residual: rn,
                    lambda: lambda_max,
                    last_increment: last_inc.unwrap_or(0.0),
                    energy: a.energy,
                    elastic_force: elastic,
                    residual_history: history,
                    iteration_seconds: timings,
                }));
            }
            if it == s.max_newton_iters {
                break;
            }
            let j = newton_jacobian(&self.mass, &k, h, None);
            let out = match robust_solve(&j, &r, &opts) {
                Ok(o) => o,
                Err(_) => return Ok(None),
            };
            lambda_max = lambda_max.max(out.lambda);
            let mut inc: f64 = 0.0;
            for i in 0..n {
                q[i] -= out.dq[i];
                if !is_fixed[i] {
                    inc = inc.max(out.dq[i].abs());
                }
            }
            if !inc.is_finite() {
                return Ok(None);
            }
            last_inc = Some(inc);
            timings.push(clock.elapsed().as_secs_f64());
        }
        Ok(None)
    }

    /// One accepted step (shrinking until Newton converges); returns its size.
    pub fn advance(&mut self, loading: &dyn Loading, t_limit: f64) -> Result<f64> {
        loop {
            let h = self.h.min(t_limit - self.t).max(f64::MIN_POSITIVE);
            self.diagnostics.attempted_h.push(h);
            let clock = std::time::Instant::now();
            match self.attempt(h, loading)? {
                Some(c) => {
                    let mut next = self.state.clone();
                    for i in 0..next.q.len() {
                        next.qdot[i] = (c.q[i] - next.q[i]) / h;
                    }
                    next.q = c.q;
                    self.frames = update_frames(&self.frames, &next)?;
                    self.state = next;
                    self.t += h;
                    self.energy = c.energy;
                    self.elastic_force = c.elastic_force;
                    self.last_residuals = c.residual_history;
                    let d = &mut self.diagnostics;
                    d.steps += 1;
                    d.iterations += c.iterations;
                    d.iteration_seconds.extend(c.iteration_seconds);
                    d.records.push(StepRecord { t: self.t, h, iterations: c.iterations, residual: c.residual, lambda: c.lambda, wall_seconds: clock.elapsed().as_secs_f64() });
                    if c.last_increment < self.settings.delta_stable && c.iterations < self.settings.n_stable {
                        self.h = (self.h * self.settings.grow).min(self.settings.h_max);
                    }
                    return Ok(h);
                }
                None => {
                    self.diagnostics.rejected += 1;
                    if self.h <= self.settings.h_min {
                        return Err(RibError::StepFloorExceeded { t: self.t });
                    }
                    self.h = (self.h * self.settings.shrink).max(self.settings.h_min);
                }
            }
        }
    }

    /// Steps until `t_end`, calling `observe` after every accepted step.
    pub fn advance_to(
        &mut self,
        t_end: f64,
        loading: &dyn Loading,
        mut observe: impl FnMut(&Simulator),
    ) -> Result<()> {
        let tiny = 1e-12 * t_end.abs().max(1.0);
        while self.t < t_end - tiny {
            self.advance(loading, t_end)?;
            observe(self);
        }
        Ok(())
    }
}
