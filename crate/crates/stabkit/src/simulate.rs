//! Closed-loop runs `ż = Az + v(t)Bz` under the constant, quadratic,
//! normalized and switching feedback laws, with empirical decay fitting.
//!
//! Matrix-backed models integrate the full vector field with the adaptive
//! Runge-Kutta pair; transport (shift) models evolve in Lagrangian
//! coordinates where the free semigroup is exact, so only the bounded
//! multiplication part is integrated (and constant control is evaluated in
//! closed form).

use nalgebra::DVector;
use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::grid::{Grid, StepFunction};
use crate::ode::{self, EventSpec, OdeOptions, OdeStep};
use crate::operator::{ControlOp, Generator, LinearOp, NonlinearOp, SystemModel};

/// Feedback laws. `Constant(lambda)` plays `v = -lambda`; the others are the
/// conventional state feedbacks used as baselines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ControlLaw {
    /// `v = -lambda`.
    Constant(f64),
    /// `v = -<B z, z>`.
    Quadratic,
    /// `v = -rho <z, B z> / |z|^2`, zero at the origin.
    Normalized(f64),
    /// `v = -rho sign(<z, B z>)`, zero on the switching surface.
    Switching(f64),
}

impl ControlLaw {
    fn value(&self, coupling: f64, norm2: f64) -> f64 {
        match self {
            ControlLaw::Constant(lambda) => -lambda,
            ControlLaw::Quadratic => -coupling,
            ControlLaw::Normalized(rho) => {
                if norm2 > 0.0 {
                    -rho * coupling / norm2
                } else {
                    0.0
                }
            }
            ControlLaw::Switching(rho) => {
                if coupling == 0.0 {
                    0.0
                } else {
                    -rho * coupling.signum()
                }
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ControlLaw::Constant(l) => format!("constant({l})"),
            ControlLaw::Quadratic => "quadratic".into(),
            ControlLaw::Normalized(r) => format!("normalized({r})"),
            ControlLaw::Switching(r) => format!("switching({r})"),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub segments: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryMeta {
    pub model: String,
    pub law: ControlLaw,
    pub method: String,
    pub stats: IntegratorStats,
}

/// Time-stamped norms, controls and control couplings of one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `|z(t)|_P`.
    pub norms: Vec<f64>,
    /// Control value `v(t)`.
    pub controls: Vec<f64>,
    /// `<B z(t), z(t)>_P`, stored for the dissipation audit.
    pub couplings: Vec<f64>,
    /// Sparse full states at requested times.
    pub snapshots: Vec<(f64, DVector<f64>)>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn initial_norm(&self) -> f64 {
        self.norms[0]
    }

    pub fn final_norm(&self) -> f64 {
        *self.norms.last().unwrap()
    }

    fn validate(&self) -> Result<()> {
        if !self.times.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::precondition("trajectory times must strictly increase"));
        }
        if self.norms.iter().any(|n| *n < 0.0) {
            return Err(Error::precondition("trajectory norms must be nonnegative"));
        }
        Ok(())
    }

    /// CSV with columns `t,norm,control,coupling`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,norm,control,coupling\n");
        for i in 0..self.times.len() {
            out.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e}\n",
                self.times[i], self.norms[i], self.controls[i], self.couplings[i]
            ));
        }
        out
    }
}

/// Optional perturbations of the closed loop (used by the robustness
/// analyzer): `ż = (A + a)z + v(t)(B + b)z + n(z)`.
#[derive(Default)]
pub struct Perturbations {
    pub dynamic: Option<LinearOp>,
    pub control: Option<ControlOp>,
    pub additive: Option<NonlinearOp>,
}

impl Perturbations {
    pub fn none() -> Self {
        Perturbations::default()
    }

    pub fn is_empty(&self) -> bool {
        self.dynamic.is_none() && self.control.is_none() && self.additive.is_none()
    }
}

/// Integrates the closed loop and samples it on a uniform output grid.
///
/// `dt_hint` controls the output resolution (it is not the integrator step,
/// which is adaptive at relative tolerance `cfg.ode_rtol`).
pub fn closed_loop_evolve(
    model: &SystemModel,
    law: &ControlLaw,
    z0: &DVector<f64>,
    t_end: f64,
    dt_hint: Option<f64>,
    cfg: &Config,
) -> Result<Trajectory> {
    simulate_perturbed(model, law, &Perturbations::none(), z0, t_end, dt_hint, &[], cfg)
}

/// `simulate` is the law-dispatching entry point of the simulator module.
pub fn simulate(
    model: &SystemModel,
    law: &ControlLaw,
    z0: &DVector<f64>,
    t_end: f64,
    cfg: &Config,
) -> Result<Trajectory> {
    closed_loop_evolve(model, law, z0, t_end, None, cfg)
}

/// Full-control entry point with perturbations and snapshot requests.
#[allow(clippy::too_many_arguments)]
pub fn simulate_perturbed(
    model: &SystemModel,
    law: &ControlLaw,
    pert: &Perturbations,
    z0: &DVector<f64>,
    t_end: f64,
    dt_hint: Option<f64>,
    snapshot_times: &[f64],
    cfg: &Config,
) -> Result<Trajectory> {
    if t_end <= 0.0 {
        return Err(Error::precondition("t_end must be positive"));
    }
    if z0.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("initial state for model '{}'", model.name),
            left: z0.len(),
            right: model.dim(),
        });
    }
    let n_out = dt_hint
        .map(|d| ((t_end / d).ceil() as usize).max(16))
        .unwrap_or(4000)
        .clamp(16, 1_000_000);

    match &model.generator {
        Generator::Shift { grid } => {
            let profile = match &model.control {
                ControlOp::Linear(LinearOp::MultiplyProfile { profile, .. }) => profile.clone(),
                _ => {
                    return Err(Error::UnsupportedVariant(
                        "shift models integrate in Lagrangian form, which needs a \
                         multiplication control operator"
                            .into(),
                    ))
                }
            };
            if !pert.is_empty() {
                return Err(Error::UnsupportedVariant(
                    "perturbed runs are only supported for matrix-backed models".into(),
                ));
            }
            if let ControlLaw::Constant(lambda) = law {
                return transport_constant_exact(
                    model, *grid, &profile, *lambda, z0, t_end, n_out, snapshot_times,
                );
            }
            transport_lagrangian_rk(
                model, *grid, &profile, law, z0, t_end, n_out, snapshot_times, cfg,
            )
        }
        _ => matrix_rk(model, law, pert, z0, t_end, n_out, snapshot_times, cfg),
    }
}

/// Exact characteristics solution for the transport model under constant
/// control: each Lagrangian amplitude is damped by the path integral of the
/// gain profile.
#[allow(clippy::too_many_arguments)]
fn transport_constant_exact(
    model: &SystemModel,
    grid: Grid,
    profile: &StepFunction,
    lambda: f64,
    z0: &DVector<f64>,
    t_end: f64,
    n_out: usize,
    snapshot_times: &[f64],
) -> Result<Trajectory> {
    let mass = grid.mass();
    let base: Vec<f64> = (0..grid.n).map(|i| profile.antiderivative(grid.node(i))).collect();
    let state_at = |t: f64| -> DVector<f64> {
        DVector::from_fn(grid.n, |i, _| {
            let w = profile.antiderivative(grid.node(i) + t) - base[i];
            z0[i] * (-lambda * w).exp()
        })
    };
    let mut times = Vec::with_capacity(n_out + 1);
    let mut norms = Vec::with_capacity(n_out + 1);
    let mut controls = Vec::with_capacity(n_out + 1);
    let mut couplings = Vec::with_capacity(n_out + 1);
    for k in 0..=n_out {
        let t = t_end * k as f64 / n_out as f64;
        let a = state_at(t);
        let ma = mass.mul_vec(&a);
        let norm2 = ma.dot(&a);
        // Coupling consistent with d/dt |z|^2 = -2 lambda <B z, z>:
        // the profile is evaluated at the advected positions.
        let ga = DVector::from_fn(grid.n, |i, _| profile.eval(grid.node(i) + t) * a[i]);
        couplings.push(ma.dot(&ga));
        times.push(t);
        norms.push(norm2.max(0.0).sqrt());
        controls.push(-lambda);
    }
    let snapshots = snapshot_times
        .iter()
        .filter(|t| **t >= 0.0 && **t <= t_end)
        .map(|t| (*t, state_at(*t)))
        .collect();
    let traj = Trajectory {
        times,
        norms,
        controls,
        couplings,
        snapshots,
        meta: TrajectoryMeta {
            model: model.name.clone(),
            law: ControlLaw::Constant(lambda),
            method: "exact-characteristics".into(),
            stats: IntegratorStats::default(),
        },
    };
    traj.validate()?;
    Ok(traj)
}

/// State-feedback laws on the transport model: adaptive integration of the
/// Lagrangian amplitudes, `da_i/dt = v(t) g(x_i + t) a_i`.
#[allow(clippy::too_many_arguments)]
fn transport_lagrangian_rk(
    model: &SystemModel,
    grid: Grid,
    profile: &StepFunction,
    law: &ControlLaw,
    z0: &DVector<f64>,
    t_end: f64,
    n_out: usize,
    snapshot_times: &[f64],
    cfg: &Config,
) -> Result<Trajectory> {
    let mass = grid.mass();
    let coupling_of = |t: f64, a: &DVector<f64>| -> f64 {
        let ga = DVector::from_fn(grid.n, |i, _| profile.eval(grid.node(i) + t) * a[i]);
        mass.mul_vec(a).dot(&ga)
    };
    let norm2_of = |a: &DVector<f64>| mass.quadratic_form(a);
    let rhs = move |t: f64, a: &DVector<f64>, v: f64| -> DVector<f64> {
        DVector::from_fn(grid.n, |i, _| v * profile.eval(grid.node(i) + t) * a[i])
    };
    run_feedback_loop(
        model,
        law,
        z0,
        t_end,
        n_out,
        snapshot_times,
        cfg,
        &coupling_of,
        &|_t, a| norm2_of(a),
        &rhs,
        "rk45-lagrangian",
    )
}

/// Matrix-backed models: integrate `ż = (A+a)z + v (B+b)z + n(z)` directly.
#[allow(clippy::too_many_arguments)]
fn matrix_rk(
    model: &SystemModel,
    law: &ControlLaw,
    pert: &Perturbations,
    z0: &DVector<f64>,
    t_end: f64,
    n_out: usize,
    snapshot_times: &[f64],
    cfg: &Config,
) -> Result<Trajectory> {
    let coupling_of = |_t: f64, z: &DVector<f64>| model.coupling(z);
    let norm2_of = |_t: f64, z: &DVector<f64>| model.dot(z, z);
    let rhs = |_t: f64, z: &DVector<f64>, v: f64| -> DVector<f64> {
        let mut dz = model
            .generator
            .apply(z)
            .expect("matrix path requires a bounded generator");
        if let Some(a) = &pert.dynamic {
            dz += a.apply(z);
        }
        let mut bz = model.control.apply(z);
        if let Some(b) = &pert.control {
            bz += b.apply(z);
        }
        dz += bz * v;
        if let Some(n) = &pert.additive {
            dz += n.apply(z);
        }
        dz
    };
    run_feedback_loop(
        model,
        law,
        z0,
        t_end,
        n_out,
        snapshot_times,
        cfg,
        &coupling_of,
        &norm2_of,
        &rhs,
        "rk45-dp",
    )
}

/// Shared integration driver: handles the feedback coupling, the switching
/// law's event segments, output sampling and metadata.
#[allow(clippy::too_many_arguments)]
fn run_feedback_loop(
    model: &SystemModel,
    law: &ControlLaw,
    z0: &DVector<f64>,
    t_end: f64,
    n_out: usize,
    snapshot_times: &[f64],
    cfg: &Config,
    coupling_of: &dyn Fn(f64, &DVector<f64>) -> f64,
    norm2_of: &dyn Fn(f64, &DVector<f64>) -> f64,
    rhs: &dyn Fn(f64, &DVector<f64>, f64) -> DVector<f64>,
    method: &str,
) -> Result<Trajectory> {
    let opts = OdeOptions {
        rtol: cfg.ode_rtol,
        atol: cfg.ode_atol,
        blowup_norm: Some(cfg.blowup_factor * z0.norm().max(1e-30)),
        ..Default::default()
    };
    let mut stats = IntegratorStats::default();
    let mut all_steps: Vec<OdeStep> = Vec::new();

    match law {
        ControlLaw::Switching(rho) => {
            // Piecewise-constant control; bisect the switching surface so the
            // integrator never steps across the discontinuity.
            let mut t = 0.0;
            let mut z = z0.clone();
            let mut sign = coupling_of(0.0, &z).signum();
            if coupling_of(0.0, &z) == 0.0 {
                sign = 0.0;
            }
            let max_segments = 20_000;
            while t < t_end {
                stats.segments += 1;
                if stats.segments > max_segments {
                    return Err(Error::precondition(format!(
                        "switching law exceeded {max_segments} segments (chattering) at t = {t}"
                    )));
                }
                let v = -rho * sign;
                let f = |tt: f64, zz: &DVector<f64>| rhs(tt, zz, v);
                let event_fn = |tt: f64, zz: &DVector<f64>| coupling_of(tt, zz);
                let sol = ode::integrate(
                    f,
                    t,
                    t_end,
                    z,
                    &opts,
                    Some(EventSpec {
                        function: &event_fn,
                        tol_t: 1e-10,
                    }),
                )?;
                stats.accepted += sol.n_accepted;
                stats.rejected += sol.n_rejected;
                stats.rhs_evals += sol.n_rhs_evals;
                let hit_event = sol.stopped_by_event;
                let last = sol.last().clone();
                append_steps(&mut all_steps, sol.steps);
                t = last.t;
                z = last.y;
                if !hit_event {
                    break;
                }
                let c = coupling_of(t, &z);
                sign = if c == 0.0 { -sign } else { c.signum() };
            }
        }
        _ => {
            let f = |tt: f64, zz: &DVector<f64>| {
                let v = law.value(coupling_of(tt, zz), norm2_of(tt, zz));
                rhs(tt, zz, v)
            };
            let sol = ode::integrate(f, 0.0, t_end, z0.clone(), &opts, None)?;
            stats.accepted = sol.n_accepted;
            stats.rejected = sol.n_rejected;
            stats.rhs_evals = sol.n_rhs_evals;
            append_steps(&mut all_steps, sol.steps);
        }
    }

    let solution = ode::OdeSolution {
        steps: all_steps,
        stopped_by_event: false,
        n_accepted: stats.accepted,
        n_rejected: stats.rejected,
        n_rhs_evals: stats.rhs_evals,
    };
    let mut times = Vec::with_capacity(n_out + 1);
    let mut norms = Vec::with_capacity(n_out + 1);
    let mut controls = Vec::with_capacity(n_out + 1);
    let mut couplings = Vec::with_capacity(n_out + 1);
    for k in 0..=n_out {
        let t = t_end * k as f64 / n_out as f64;
        let z = solution.sample(t);
        let c = coupling_of(t, &z);
        let n2 = norm2_of(t, &z);
        times.push(t);
        norms.push(n2.max(0.0).sqrt());
        couplings.push(c);
        controls.push(law.value(c, n2));
    }
    let snapshots = snapshot_times
        .iter()
        .filter(|t| **t >= 0.0 && **t <= t_end)
        .map(|t| (*t, solution.sample(*t)))
        .collect();
    let traj = Trajectory {
        times,
        norms,
        controls,
        couplings,
        snapshots,
        meta: TrajectoryMeta {
            model: model.name.clone(),
            law: law.clone(),
            method: method.into(),
            stats,
        },
    };
    traj.validate()?;
    Ok(traj)
}

fn append_steps(all: &mut Vec<OdeStep>, steps: Vec<OdeStep>) {
    for s in steps {
        if all.last().map(|l| s.t > l.t).unwrap_or(true) {
            all.push(s);
        }
    }
}

/// Result of an exponential-decay fit on the trailing window.
#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    /// `-slope` of the least-squares line through `(t, ln |z|)`.
    pub rate: f64,
    /// Empirical overshoot: max over samples of `|z(t)| / (|z0| e^{-rate t})`.
    pub overshoot: f64,
    pub r_squared: f64,
    /// Set when norms hit exact zero inside the window (fit truncated there).
    pub exact_extinction: bool,
}

/// Least-squares exponential fit over the trailing `window` fraction of the run.
pub fn fit_decay(traj: &Trajectory, window: f64) -> Result<DecayFit> {
    if !(0.0 < window && window <= 1.0) {
        return Err(Error::precondition("fit window must be in (0, 1]"));
    }
    let t_end = *traj.times.last().unwrap();
    let t_start = t_end * (1.0 - window);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut extinct = false;
    for (t, n) in traj.times.iter().zip(&traj.norms) {
        if *t < t_start {
            continue;
        }
        if *n == 0.0 {
            extinct = true;
            break;
        }
        xs.push(*t);
        ys.push(n.ln());
    }
    if xs.len() < 10 {
        return Err(Error::precondition(format!(
            "fit window contains {} samples; need at least 10 positive norms",
            xs.len()
        )));
    }
    let (slope, _intercept, r2) = crate::linalg::fit_line(&xs, &ys);
    let rate = -slope;
    let z0 = traj.initial_norm().max(1e-300);
    let overshoot = traj
        .times
        .iter()
        .zip(&traj.norms)
        .map(|(t, n)| n / (z0 * (-rate * t).exp()))
        .fold(0.0, f64::max);
    Ok(DecayFit {
        rate,
        overshoot,
        r_squared: r2,
        exact_extinction: extinct,
    })
}

/// Log-log slope of `|z(t)|` against `t` over `[t_lo, t_hi]` (power-law fit).
pub fn fit_loglog(traj: &Trajectory, t_lo: f64, t_hi: f64) -> Result<(f64, f64)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (t, n) in traj.times.iter().zip(&traj.norms) {
        if *t >= t_lo && *t <= t_hi && *t > 0.0 && *n > 0.0 {
            xs.push(t.ln());
            ys.push(n.ln());
        }
    }
    if xs.len() < 10 {
        return Err(Error::precondition("not enough samples for a log-log fit"));
    }
    let (slope, _, r2) = crate::linalg::fit_line(&xs, &ys);
    Ok((slope, r2))
}

/// Worst violation of the integral dissipation inequality
/// `|z(t)|^2 - |z(s)|^2 <= -2 lambda * integral of <B z, z> over [s, t]`
/// with the integral taken by trapezoid on the stored samples.
/// Nonpositive return means the inequality held everywhere.
pub fn dissipation_audit(traj: &Trajectory, lambda: f64) -> f64 {
    let k = traj.times.len();
    // F[k] = |z(t_k)|^2 + 2 lambda I[k]; violations are increments of F.
    let mut f_prev = traj.norms[0] * traj.norms[0];
    let mut running_min = f_prev;
    let mut worst = f64::NEG_INFINITY;
    let mut integral = 0.0;
    for i in 1..k {
        let dt = traj.times[i] - traj.times[i - 1];
        integral += 0.5 * dt * (traj.couplings[i] + traj.couplings[i - 1]);
        let f = traj.norms[i] * traj.norms[i] + 2.0 * lambda * integral;
        worst = worst.max(f - running_min);
        running_min = running_min.min(f);
        f_prev = f;
    }
    let _ = f_prev;
    if worst == f64::NEG_INFINITY {
        0.0
    } else {
        worst
    }
}

/// Worst relative violation of the growth bound `|z(t)| <= e^{lambda L t}|z0|`.
pub fn growth_bound_violation(traj: &Trajectory, lambda: f64, lipschitz: f64) -> f64 {
    let z0 = traj.initial_norm().max(1e-300);
    traj.times
        .iter()
        .zip(&traj.norms)
        .map(|(t, n)| n / (z0 * (lambda * lipschitz * t).exp()) - 1.0)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{InnerProduct, SemigroupClass};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn scalar_field_model(nm: &str, a: DMatrix<f64>, b: LinearOp) -> SystemModel {
        let dim = a.nrows();
        SystemModel {
            name: nm.into(),
            generator: Generator::Dense(a),
            control: ControlOp::Linear(b),
            inner: InnerProduct::Identity,
            semigroup_class: SemigroupClass::Unknown,
            dimension: crate::operator::Dimension::Finite(dim),
            lipschitz: None,
        }
    }

    #[test]
    fn constant_law_matches_scalar_exponential() {
        // A = 0, B = I, v = -lambda: z(t) = e^{-lambda t} z0 coordinatewise.
        let model = scalar_field_model(
            "decay",
            DMatrix::zeros(2, 2),
            LinearOp::Identity { dim: 2 },
        );
        let z0 = DVector::from_vec(vec![1.0, -2.0]);
        let traj = simulate(
            &model,
            &ControlLaw::Constant(0.7),
            &z0,
            3.0,
            &Config::default(),
        )
        .unwrap();
        let expect = z0.norm() * (-0.7f64 * 3.0).exp();
        assert_relative_eq!(traj.final_norm(), expect, max_relative = 1e-8);
        assert_relative_eq!(traj.initial_norm(), z0.norm(), epsilon = 1e-12);
    }

    #[test]
    fn closed_loop_agrees_with_matrix_exponential() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.1, 0.0, -0.5]);
        let b = DMatrix::from_row_slice(3, 3, &[0.5, 0.0, 0.2, 0.0, 1.0, 0.0, 0.0, 0.3, 0.8]);
        let lambda = 0.4;
        let model = scalar_field_model("vsexp", a.clone(), LinearOp::Dense(b.clone()));
        let z0 = DVector::from_vec(vec![1.0, 0.5, -0.25]);
        let traj = simulate_perturbed(
            &model,
            &ControlLaw::Constant(lambda),
            &Perturbations::none(),
            &z0,
            2.0,
            None,
            &[0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0],
            &Config::default(),
        )
        .unwrap();
        let closed = &a - &b * lambda;
        for (t, z) in &traj.snapshots {
            let exact = crate::semigroup::matrix_exponential(&closed, *t).unwrap() * &z0;
            assert!(
                (z - &exact).norm() <= 1e-7 * exact.norm().max(1.0),
                "checkpoint t = {t}"
            );
        }
    }

    #[test]
    fn quadratic_law_gives_inverse_sqrt_decay() {
        let model = scalar_field_model(
            "baseline",
            DMatrix::zeros(2, 2),
            LinearOp::Identity { dim: 2 },
        );
        let z0 = DVector::from_vec(vec![1.0, 1.0]);
        let traj = simulate(&model, &ControlLaw::Quadratic, &z0, 100.0, &Config::default())
            .unwrap();
        let (slope, r2) = fit_loglog(&traj, 10.0, 100.0).unwrap();
        assert!((slope + 0.5).abs() < 0.05, "log-log slope {slope}");
        assert!(r2 > 0.999);
    }

    #[test]
    fn fit_decay_exact_exponential() {
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
        let norms: Vec<f64> = times.iter().map(|t| (-2.0 * t).exp()).collect();
        let k = times.len();
        let traj = Trajectory {
            times,
            norms,
            controls: vec![0.0; k],
            couplings: vec![0.0; k],
            snapshots: vec![],
            meta: TrajectoryMeta {
                model: "synthetic".into(),
                law: ControlLaw::Constant(0.0),
                method: "synthetic".into(),
                stats: IntegratorStats::default(),
            },
        };
        let fit = fit_decay(&traj, 0.5).unwrap();
        assert_relative_eq!(fit.rate, 2.0, epsilon = 1e-9);
        assert!(fit.r_squared >= 0.999_999);
        assert!(!fit.exact_extinction);
    }

    #[test]
    fn fit_decay_constant_norm_is_zero_rate() {
        let times: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let k = times.len();
        let traj = Trajectory {
            times,
            norms: vec![3.0; k],
            controls: vec![0.0; k],
            couplings: vec![0.0; k],
            snapshots: vec![],
            meta: TrajectoryMeta {
                model: "synthetic".into(),
                law: ControlLaw::Constant(0.0),
                method: "synthetic".into(),
                stats: IntegratorStats::default(),
            },
        };
        let fit = fit_decay(&traj, 0.5).unwrap();
        assert!(fit.rate.abs() <= 1e-12);
    }

    #[test]
    fn power_law_data_flagged_by_low_r_squared() {
        // 1/sqrt(t) decay is not exponential: on [1, 100] the exponential fit
        // leaves visible curvature while genuine exponential data does not.
        let times: Vec<f64> = (0..1000).map(|i| 1.0 + i as f64 * 0.099).collect();
        let norms: Vec<f64> = times.iter().map(|t| 1.0 / t.sqrt()).collect();
        let k = times.len();
        let traj = Trajectory {
            times,
            norms,
            controls: vec![0.0; k],
            couplings: vec![0.0; k],
            snapshots: vec![],
            meta: TrajectoryMeta {
                model: "synthetic".into(),
                law: ControlLaw::Quadratic,
                method: "synthetic".into(),
                stats: IntegratorStats::default(),
            },
        };
        let fit = fit_decay(&traj, 1.0).unwrap();
        assert!(
            fit.r_squared < 0.97,
            "power-law data should fit an exponential poorly, r2 = {}",
            fit.r_squared
        );
    }

    #[test]
    fn switching_law_handles_sign_changes() {
        // B indefinite: the coupling changes sign along rotations.
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let model = scalar_field_model("switch", a, LinearOp::Dense(b));
        let z0 = DVector::from_vec(vec![1.0, 0.3]);
        let traj = simulate(
            &model,
            &ControlLaw::Switching(0.5),
            &z0,
            6.0,
            &Config::default(),
        )
        .unwrap();
        assert!(traj.meta.stats.segments > 1, "expected switching events");
        // Controls take only the values {-0.5, 0, 0.5}.
        for v in &traj.controls {
            assert!(v.abs() <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn dissipation_audit_passes_for_positive_b_contraction() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let model = scalar_field_model("audit", a, LinearOp::Identity { dim: 2 });
        let z0 = DVector::from_vec(vec![1.0, -1.0]);
        let traj = simulate(
            &model,
            &ControlLaw::Constant(0.3),
            &z0,
            5.0,
            &Config::default(),
        )
        .unwrap();
        assert!(dissipation_audit(&traj, 0.3) <= 1e-6);
    }
}
