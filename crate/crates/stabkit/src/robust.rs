//! Admissible perturbation radii for the constant control, and their
//! validation by simulating perturbed closed loops at and beyond the
//! margins. Bounds are sufficient conditions: probes inside a margin must
//! decay, probes outside are informational only.

use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::gain::GainEnvelope;
use crate::operator::{ControlOp, LinearOp, NonlinearOp, SystemModel};
use crate::rng::normal_vector;
use crate::simulate::{fit_decay, simulate_perturbed, ControlLaw, Perturbations};

/// Degraded observability constant under a dynamic perturbation of norm
/// `a_norm`: `delta_a = delta - T^2 L_B |a| (2 + T |a|)`. May be negative
/// (the bound is lost).
pub fn perturbed_delta(delta: f64, t_horizon: f64, l_b: f64, a_norm: f64) -> f64 {
    assert!(delta > 0.0 && t_horizon >= 0.0 && l_b >= 0.0 && a_norm >= 0.0);
    delta - t_horizon * t_horizon * l_b * a_norm * (2.0 + t_horizon * a_norm)
}

/// Margin polynomial `P(X) = T^3 L_B X^2 + 2 T^2 L_B X + lambda T K~ - delta`;
/// the dynamic radius is its positive root and `P < 0` on `(0, r)`.
pub fn p_poly(delta: f64, t_horizon: f64, l_b: f64, lambda: f64, k_tilde: f64, x: f64) -> f64 {
    t_horizon.powi(3) * l_b * x * x + 2.0 * t_horizon * t_horizon * l_b * x
        + lambda * t_horizon * k_tilde
        - delta
}

#[derive(Debug, Clone, Serialize)]
pub struct DynamicRadius {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Admissible dynamic-perturbation radius
/// `r = (-1 + sqrt(1 + delta/(T L_B) - lambda K~/L_B)) / T`,
/// or `None` (with the reason) when the formula gives no positive margin.
pub fn dynamic_radius(delta: f64, t_horizon: f64, l_b: f64, lambda: f64, k_tilde: f64) -> DynamicRadius {
    assert!(delta > 0.0 && t_horizon > 0.0 && l_b > 0.0 && lambda >= 0.0 && k_tilde >= 0.0);
    let radicand = 1.0 + delta / (t_horizon * l_b) - lambda * k_tilde / l_b;
    if radicand < 0.0 {
        return DynamicRadius {
            value: None,
            reason: Some(format!("radicand {radicand:.3e} < 0: no guaranteed margin")),
        };
    }
    let r = (-1.0 + radicand.sqrt()) / t_horizon;
    if r <= 0.0 {
        return DynamicRadius {
            value: None,
            reason: Some(format!(
                "radius {r:.3e} <= 0 (gain too close to the admissible boundary)"
            )),
        };
    }
    DynamicRadius {
        value: Some(r),
        reason: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationKind {
    /// Linear dissipative perturbation of the generator.
    Dynamic,
    /// Lipschitz perturbation of the control operator.
    Control,
    /// Lipschitz additive perturbation of the dynamics.
    Additive,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginRun {
    pub kind: PerturbationKind,
    pub inside: bool,
    pub scale: f64,
    pub fitted_rate: f64,
    pub r_squared: f64,
    /// `Some(pass)` for probes inside the margin; outside probes carry no
    /// pass/fail semantics.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<bool>,
}

/// The assembled robustness report.
#[derive(Debug, Clone, Serialize)]
pub struct RobustnessReport {
    /// Dynamic-perturbation radius (positive root of the margin polynomial).
    pub r: DynamicRadius,
    pub r_tilde: f64,
    /// Control-perturbation bound `-P(r~)/T`.
    pub lb_bound: f64,
    /// Additive-perturbation bound `sigma / M`.
    pub ln_bound: f64,
    /// Joint bound on `L_a + lambda L_b`.
    pub combined_bound: f64,
    /// Uncoupled bounds `(sigma/(2M), sigma T K~ / (2 M delta))`.
    pub separate_bounds: (f64, f64),
    /// `(T^3 L_B, 2 T^2 L_B, lambda T K~ - delta)`.
    pub p_poly_coefficients: (f64, f64, f64),
    pub validation_runs: Vec<MarginRun>,
}

/// Populates the margin bounds for a synthesized envelope at sub-radius
/// `r_tilde < r`.
pub fn joint_bounds(env: &GainEnvelope, l_b: f64, r_tilde: f64) -> Result<RobustnessReport> {
    if l_b <= 0.0 {
        return Err(Error::precondition("joint_bounds: L_B must be positive"));
    }
    let t = env.horizon_t;
    let radius = dynamic_radius(env.delta, t, l_b, env.lambda, env.k_tilde);
    match radius.value {
        Some(r) if r_tilde < r => {}
        Some(r) => {
            return Err(Error::precondition(format!(
                "r_tilde = {r_tilde} must stay below the dynamic radius r = {r}"
            )))
        }
        None => {
            return Err(Error::precondition(format!(
                "no dynamic radius: {}",
                radius.reason.clone().unwrap_or_default()
            )))
        }
    }
    let lb_bound = -p_poly(env.delta, t, l_b, env.lambda, env.k_tilde, r_tilde) / t;
    let ln_bound = env.sigma / env.m_env;
    let separate = (
        env.sigma / (2.0 * env.m_env),
        env.sigma * t * env.k_tilde / (2.0 * env.m_env * env.delta),
    );
    Ok(RobustnessReport {
        r: radius,
        r_tilde,
        lb_bound,
        ln_bound,
        combined_bound: ln_bound,
        separate_bounds: separate,
        p_poly_coefficients: (
            t.powi(3) * l_b,
            2.0 * t * t * l_b,
            env.lambda * t * env.k_tilde - env.delta,
        ),
        validation_runs: Vec::new(),
    })
}

/// Simulates the perturbed closed loop with the envelope's gain and fits the
/// decay. For probes inside a margin, the verdict is `pass` iff the fitted
/// rate is positive; dynamic perturbations must be dissipative (checked by
/// sampling) before the run is accepted.
#[allow(clippy::too_many_arguments)]
pub fn validate_margin(
    model: &SystemModel,
    env: &GainEnvelope,
    kind: PerturbationKind,
    perturbation: Perturbations,
    scale: f64,
    inside: bool,
    z0: &DVector<f64>,
    t_end: f64,
    rng: &mut ChaCha8Rng,
    cfg: &Config,
) -> Result<MarginRun> {
    match kind {
        PerturbationKind::Dynamic => {
            let a = perturbation.dynamic.as_ref().ok_or_else(|| {
                Error::precondition("dynamic margin run needs the generator perturbation")
            })?;
            // Dissipativity gate for the admissible class.
            for _ in 0..64 {
                let z = normal_vector(rng, model.dim());
                let rate = model.dot(&a.apply(&z), &z);
                if rate > 1e-10 * model.dot(&z, &z) {
                    return Err(Error::precondition(
                        "dynamic perturbation is not dissipative: <a z, z> > 0 at a sample, \
                         outside the admissible linear class",
                    ));
                }
            }
        }
        PerturbationKind::Control => {
            let b = perturbation.control.as_ref().ok_or_else(|| {
                Error::precondition("control margin run needs the control perturbation")
            })?;
            if b.lipschitz().is_none() {
                return Err(Error::precondition(
                    "control perturbation lacks Lipschitz metadata",
                ));
            }
        }
        PerturbationKind::Additive => {
            let n = perturbation.additive.as_ref().ok_or_else(|| {
                Error::precondition("additive margin run needs the additive perturbation")
            })?;
            if n.lipschitz_global.is_none() {
                return Err(Error::precondition(
                    "additive perturbation lacks Lipschitz metadata",
                ));
            }
        }
    }
    let traj = simulate_perturbed(
        model,
        &ControlLaw::Constant(env.lambda),
        &perturbation,
        z0,
        t_end,
        None,
        &[],
        cfg,
    )?;
    let fit = fit_decay(&traj, 0.5)?;
    let verdict = if inside { Some(fit.rate > 0.0) } else { None };
    Ok(MarginRun {
        kind,
        inside,
        scale,
        fitted_rate: fit.rate,
        r_squared: fit.r_squared,
        verdict,
    })
}

/// Closed-form wave-example bounds: contraction factor
/// `gamma = 8 lambda^2 - 2 lambda + 1` for gains in `(0, 1/4)`, with
/// state-perturbation bound `-sqrt(gamma) ln(gamma) / 4` and
/// velocity-multiplier bound `-sqrt(gamma) ln(gamma)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WaveBounds {
    pub gamma: f64,
    pub p_bound: f64,
    pub q_bound: f64,
}

pub fn wave_perturbation_bounds(lambda: f64) -> Result<WaveBounds> {
    if !(0.0 < lambda && lambda < 0.25) {
        return Err(Error::precondition(
            "wave bounds need a gain in (0, 1/4) for the contraction factor to stay in (0,1)",
        ));
    }
    let gamma = 8.0 * lambda * lambda - 2.0 * lambda + 1.0;
    debug_assert!(gamma > 0.0 && gamma < 1.0);
    let core = -gamma.sqrt() * gamma.ln();
    Ok(WaveBounds {
        gamma,
        p_bound: core / 4.0,
        q_bound: core,
    })
}

/// Convenience constructors for the margin probes.
pub fn dynamic_probe(op: LinearOp) -> Perturbations {
    Perturbations {
        dynamic: Some(op),
        control: None,
        additive: None,
    }
}

pub fn control_probe(op: ControlOp) -> Perturbations {
    Perturbations {
        dynamic: None,
        control: Some(op),
        additive: None,
    }
}

pub fn additive_probe(op: NonlinearOp) -> Perturbations {
    Perturbations {
        dynamic: None,
        control: None,
        additive: Some(op),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn perturbed_delta_examples() {
        assert_relative_eq!(perturbed_delta(1.0, 1.0, 1.0, 0.0), 1.0);
        // delta=1, T=1, L_B=1, |a|=0.2: 1 - 0.2 * 2.2 = 0.56.
        assert_relative_eq!(perturbed_delta(1.0, 1.0, 1.0, 0.2), 0.56, max_relative = 1e-12);
        // Monotone decreasing in the perturbation norm.
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let d = perturbed_delta(1.0, 1.0, 1.0, 0.05 * k as f64);
            assert!(d < prev);
            prev = d;
        }
    }

    #[test]
    fn dynamic_radius_direct_evaluation() {
        // delta=1, T=1, L_B=1, lambda K~ = 0.5: r = -1 + sqrt(1.5).
        let r = dynamic_radius(1.0, 1.0, 1.0, 0.5, 1.0).value.unwrap();
        assert_relative_eq!(r, -1.0 + 1.5f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(r, 0.2247, epsilon = 1e-4);
    }

    #[test]
    fn radius_is_root_of_margin_polynomial() {
        for (delta, t, l_b, lambda, kt) in [
            (1.0, 1.0, 1.0, 0.05, 4.0),
            (2.0, 2.0, 0.7, 0.01, 11.0),
            (0.5, 3.0, 1.3, 0.002, 40.0),
        ] {
            let r = dynamic_radius(delta, t, l_b, lambda, kt).value.unwrap();
            let residual = p_poly(delta, t, l_b, lambda, kt, r);
            assert!(residual.abs() <= 1e-9, "P(r) = {residual:.3e}");
            // Independent root oracle: quadratic formula on the coefficients.
            let (a2, a1, a0) = (t.powi(3) * l_b, 2.0 * t * t * l_b, lambda * t * kt - delta);
            let root = (-a1 + (a1 * a1 - 4.0 * a2 * a0).sqrt()) / (2.0 * a2);
            assert_relative_eq!(r, root, max_relative = 1e-10);
        }
    }

    #[test]
    fn radius_positive_in_zero_gain_limit() {
        let r = dynamic_radius(1.0, 1.0, 1.0, 0.0, 10.0).value.unwrap();
        assert_relative_eq!(r, -1.0 + 2.0f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn radius_disappears_past_coercivity_boundary() {
        // lambda K~ >= delta/T makes the radicand <= 1.
        let out = dynamic_radius(1.0, 1.0, 1.0, 1.0, 1.0);
        assert!(out.value.is_none());
        assert!(out.reason.is_some());
    }

    #[test]
    fn wave_bounds_at_tenth() {
        let wb = wave_perturbation_bounds(0.1).unwrap();
        assert_relative_eq!(wb.gamma, 0.88, max_relative = 1e-12);
        assert_relative_eq!(wb.p_bound, 0.0300, epsilon = 5e-5);
        assert_relative_eq!(wb.q_bound, 0.1199, epsilon = 5e-5);
        assert!(wave_perturbation_bounds(0.3).is_err());
    }
}
