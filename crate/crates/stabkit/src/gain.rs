//! Constant-gain synthesis: turns a certified observability constant and
//! Lipschitz data into an admissible gain interval `(0, lambda_max)` and an
//! explicit decay envelope `|z(t)| <= M e^{-sigma t} |z0|`.

use serde::Serialize;

use crate::certify::{Certificate, Variant};
use crate::error::{Error, Result};
use crate::operator::SystemModel;
use crate::simulate::{fit_decay, ControlLaw, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EnvelopeMode {
    /// Valid for every initial state.
    Uniform,
    /// Valid on the ball `|z0| <= radius` (locally Lipschitz, positive `B`).
    Local { radius: f64 },
}

/// Admissible gain interval and decay envelope.
#[derive(Debug, Clone, Serialize)]
pub struct GainEnvelope {
    pub mode: EnvelopeMode,
    pub lambda_max: f64,
    /// Chosen gain, the envelope-optimal midpoint clipped into the interval.
    pub lambda: f64,
    /// Per-window contraction factor, in (0, 1).
    pub gamma: f64,
    /// Decay rate `-ln(gamma) / (2T)`.
    pub sigma: f64,
    /// Overshoot constant (>= 1).
    pub m_env: f64,
    /// Uniform mode: the constant `K~`; local mode: the ball Lipschitz
    /// constant `L_R`.
    pub k_tilde: f64,
    pub horizon_t: f64,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_max: Option<f64>,
}

/// `K~ = 2 K L (1 + e^{eta1 L T})` with the explicit convention
/// `K = T L e^{eta1 L T}` (valid since `e^x - 1 <= x e^x`).
pub fn k_tilde(lipschitz: f64, t_horizon: f64, eta1: f64) -> f64 {
    assert!(lipschitz >= 0.0 && t_horizon > 0.0 && eta1 > 0.0);
    let growth = (eta1 * lipschitz * t_horizon).exp();
    let k = t_horizon * lipschitz * growth;
    2.0 * k * lipschitz * (1.0 + growth)
}

/// Contraction factor of the uniform envelope at a given gain.
pub fn gamma_uniform(delta: f64, t_horizon: f64, ktilde: f64, lambda: f64) -> f64 {
    1.0 - 2.0 * lambda * (delta - lambda * t_horizon * ktilde)
}

/// Contraction factor of the local envelope at a given gain.
pub fn gamma_local(delta: f64, t_horizon: f64, l_ball: f64, lambda: f64) -> f64 {
    1.0 - 2.0 * lambda * (delta - 2.0 * lambda * t_horizon * t_horizon * l_ball * l_ball)
}

/// Gain synthesis from a certified quadratic bound, globally Lipschitz `B`.
///
/// `lambda_max = min(eta1, eta2, delta / (T K~), v_max)` with
/// `eta1 = 1 / (L T)` and `eta2` the positivity boundary of `gamma`;
/// the default chosen gain is the envelope-optimal `delta / (2 T K~)`,
/// clipped to `0.99 lambda_max` when it falls outside the interval.
pub fn synthesize_uniform(
    cert: &Certificate,
    lipschitz: f64,
    v_max: Option<f64>,
) -> Result<GainEnvelope> {
    if cert.variant != Variant::Quadratic {
        return Err(Error::precondition(format!(
            "uniform synthesis consumes quadratic certificates, got {:?}",
            cert.variant
        )));
    }
    if cert.delta <= 0.0 {
        return Err(Error::NoAdmissibleGain { delta: cert.delta });
    }
    if lipschitz <= 0.0 {
        return Err(Error::precondition("synthesize_uniform: Lipschitz constant must be > 0"));
    }
    let t = cert.horizon_t;
    let delta = cert.delta;
    let eta1 = 1.0 / (lipschitz * t);
    let ktilde = k_tilde(lipschitz, t, eta1);
    let coercivity_bound = delta / (t * ktilde);
    // gamma > 0 below the smaller root of 2 T K~ l^2 - 2 delta l + 1 = 0.
    let disc = delta * delta - 2.0 * t * ktilde;
    let eta2 = if disc >= 0.0 {
        (delta - disc.sqrt()) / (2.0 * t * ktilde)
    } else {
        f64::INFINITY
    };
    let mut lambda_max = eta1.min(eta2).min(coercivity_bound);
    if let Some(vm) = v_max {
        lambda_max = lambda_max.min(vm);
    }
    if lambda_max <= 0.0 {
        return Err(Error::InfeasibleConstraint { lambda_max });
    }
    let optimal = delta / (2.0 * t * ktilde);
    let lambda = if optimal < lambda_max {
        optimal
    } else {
        0.99 * lambda_max
    };
    let gamma = gamma_uniform(delta, t, ktilde, lambda);
    debug_assert!(gamma > 0.0 && gamma < 1.0);
    let sigma = -gamma.ln() / (2.0 * t);
    let m_env = (lambda * lipschitz * t).exp() / gamma.sqrt();
    Ok(GainEnvelope {
        mode: EnvelopeMode::Uniform,
        lambda_max,
        lambda,
        gamma,
        sigma,
        m_env,
        k_tilde: ktilde,
        horizon_t: t,
        delta,
        v_max,
    })
}

/// Local synthesis for positive, locally Lipschitz `B`: valid on the ball
/// `|z0| <= radius` with ball constant `l_ball`, gain interval
/// `(0, min(eta, delta / (2 T^2 L_R^2)))`.
pub fn synthesize_local(
    model: &SystemModel,
    cert: &Certificate,
    l_ball: f64,
    radius: f64,
) -> Result<GainEnvelope> {
    if cert.delta <= 0.0 {
        return Err(Error::NoAdmissibleGain { delta: cert.delta });
    }
    if l_ball <= 0.0 || radius <= 0.0 {
        return Err(Error::precondition("synthesize_local: L_R and R must be > 0"));
    }
    match model.control.positive(&model.inner) {
        Some(true) => {}
        _ => {
            return Err(Error::precondition(
                "local synthesis requires the positivity flag <B z, z> >= 0 on the control operator",
            ))
        }
    }
    let t = cert.horizon_t;
    let delta = cert.delta;
    let bound = delta / (2.0 * t * t * l_ball * l_ball);
    // gamma > 0 below the smaller root of 4 T^2 L^2 l^2 - 2 delta l + 1 = 0.
    let quad = 4.0 * t * t * l_ball * l_ball;
    let disc = delta * delta - quad;
    let eta = if disc >= 0.0 {
        (delta - disc.sqrt()) / quad
    } else {
        f64::INFINITY
    };
    let lambda_max = eta.min(bound);
    if lambda_max <= 0.0 {
        return Err(Error::InfeasibleConstraint { lambda_max });
    }
    // Vertex of the gamma parabola: delta / (4 T^2 L_R^2).
    let optimal = delta / quad;
    let lambda = if optimal < lambda_max {
        optimal
    } else {
        0.99 * lambda_max
    };
    let gamma = gamma_local(delta, t, l_ball, lambda);
    debug_assert!(gamma > 0.0 && gamma < 1.0);
    let sigma = -gamma.ln() / (2.0 * t);
    // Positive B keeps the closed-loop norm non-increasing inside each
    // window, so the overshoot is 1/sqrt(gamma) alone.
    let m_env = 1.0 / gamma.sqrt();
    Ok(GainEnvelope {
        mode: EnvelopeMode::Local { radius },
        lambda_max,
        lambda,
        gamma,
        sigma,
        m_env,
        k_tilde: l_ball,
        horizon_t: t,
        delta,
        v_max: None,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeReport {
    pub pass: bool,
    /// Max over samples of `|z(t)| / (M e^{-sigma t} |z0|)`.
    pub worst_ratio: f64,
    pub fitted_rate: f64,
    pub fitted_r_squared: f64,
}

/// Checks a trajectory against the envelope bound at every stored sample and
/// fits the empirical decay rate on the trailing half.
pub fn envelope_check(traj: &Trajectory, env: &GainEnvelope) -> Result<EnvelopeReport> {
    match &traj.meta.law {
        ControlLaw::Constant(l) if (*l - env.lambda).abs() <= 1e-12 * env.lambda.abs().max(1.0) => {}
        other => {
            return Err(Error::precondition(format!(
                "trajectory used law {other:?}, envelope expects constant({})",
                env.lambda
            )))
        }
    }
    let z0 = traj.initial_norm();
    if z0 == 0.0 {
        // The zero state stays at zero; the envelope holds trivially.
        let pass = traj.norms.iter().all(|n| *n <= 1e-14);
        return Ok(EnvelopeReport {
            pass,
            worst_ratio: 0.0,
            fitted_rate: 0.0,
            fitted_r_squared: 1.0,
        });
    }
    let mut worst: f64 = 0.0;
    for (t, n) in traj.times.iter().zip(&traj.norms) {
        let bound = env.m_env * (-env.sigma * t).exp() * z0;
        worst = worst.max(n / bound);
    }
    let pass = worst <= 1.0 + 1e-6;
    let fit = fit_decay(traj, 0.5)?;
    Ok(EnvelopeReport {
        pass,
        worst_ratio: worst,
        fitted_rate: fit.rate,
        fitted_r_squared: fit.r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{Method, QuadratureMeta};
    use approx::assert_relative_eq;

    fn quad_cert(t: f64, delta: f64) -> Certificate {
        Certificate {
            variant: Variant::Quadratic,
            horizon_t: t,
            delta,
            method: Method::GramEigenvalue,
            certified: true,
            witness: None,
            quadrature: QuadratureMeta {
                nodes: 64,
                converged: true,
                scheme: "gauss-legendre".into(),
            },
        }
    }

    #[test]
    fn k_tilde_zero_lipschitz_vanishes() {
        assert_eq!(k_tilde(0.0, 1.0, 1.0), 0.0);
    }

    #[test]
    fn k_tilde_direct_evaluation() {
        // L = 1, T = 1, eta1 = ln 2: growth = 2, K = 2, K~ = 2*2*1*(1+2) = 12.
        assert_relative_eq!(k_tilde(1.0, 1.0, 2.0f64.ln()), 12.0, max_relative = 1e-12);
    }

    #[test]
    fn k_tilde_monotone_in_each_argument() {
        let ls = [0.5, 1.0, 2.0];
        let ts = [0.5, 1.0, 2.0];
        let es = [0.2, 0.5, 1.0];
        for w in ls.windows(2) {
            assert!(k_tilde(w[0], 1.0, 0.5) <= k_tilde(w[1], 1.0, 0.5));
        }
        for w in ts.windows(2) {
            assert!(k_tilde(1.0, w[0], 0.5) <= k_tilde(1.0, w[1], 0.5));
        }
        for w in es.windows(2) {
            assert!(k_tilde(1.0, 1.0, w[0]) <= k_tilde(1.0, 1.0, w[1]));
        }
    }

    #[test]
    fn uniform_interval_nonempty_for_identity_pair() {
        let env = synthesize_uniform(&quad_cert(1.0, 1.0), 1.0, None).unwrap();
        assert!(env.lambda_max > 0.0);
        assert!(env.lambda > 0.0 && env.lambda < env.lambda_max);
        assert!(env.gamma > 0.0 && env.gamma < 1.0);
        assert!(env.sigma > 0.0);
        assert!(env.m_env >= 1.0);
        // Exact decay of the scalar loop beats the conservative envelope rate.
        assert!(env.lambda >= env.sigma);
    }

    #[test]
    fn degenerate_certificate_rejected() {
        match synthesize_uniform(&quad_cert(1.0, 0.0), 1.0, None) {
            Err(Error::NoAdmissibleGain { .. }) => {}
            other => panic!("expected NoAdmissibleGain, got {other:?}"),
        }
    }

    #[test]
    fn v_max_clips_interval() {
        let free = synthesize_uniform(&quad_cert(1.0, 1.0), 1.0, None).unwrap();
        let clipped = synthesize_uniform(&quad_cert(1.0, 1.0), 1.0, Some(free.lambda_max / 4.0))
            .unwrap();
        assert!(clipped.lambda_max <= free.lambda_max / 4.0 + 1e-15);
        assert!(clipped.lambda < clipped.lambda_max);
    }

    #[test]
    fn gamma_is_convex_with_algebraic_minimum() {
        let cert = quad_cert(2.0, 1.5);
        let env = synthesize_uniform(&cert, 0.8, None).unwrap();
        let optimal = env.delta / (2.0 * env.horizon_t * env.k_tilde);
        // Grid search over the admissible interval: the vertex wins.
        let mut best = (f64::INFINITY, 0.0);
        let cells = 2000;
        for i in 1..cells {
            let l = env.lambda_max * i as f64 / cells as f64;
            let g = gamma_uniform(env.delta, env.horizon_t, env.k_tilde, l);
            if g < best.0 {
                best = (g, l);
            }
        }
        let cell = env.lambda_max / cells as f64;
        if optimal < env.lambda_max {
            assert!((best.1 - optimal).abs() <= cell, "grid minimum vs vertex");
        } else {
            assert!(env.lambda_max - best.1 <= 2.0 * cell, "boundary minimum");
        }
        // sigma at the chosen (optimal) gain dominates sampled gains.
        let sigma_at = |l: f64| {
            let g = gamma_uniform(env.delta, env.horizon_t, env.k_tilde, l);
            if g > 0.0 && g < 1.0 {
                -g.ln() / (2.0 * env.horizon_t)
            } else {
                f64::NEG_INFINITY
            }
        };
        for i in 1..50 {
            let l = env.lambda_max * i as f64 / 50.0 * 0.999;
            assert!(sigma_at(env.lambda) >= sigma_at(l) - 1e-12);
        }
    }
}
