//! Adaptive explicit Runge-Kutta integration (Dormand-Prince 5(4) embedded
//! pair) with cubic-Hermite dense output and scalar event localization.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// One accepted step: time, state, and the derivative there (for the
/// Hermite interpolant).
#[derive(Debug, Clone)]
pub struct OdeStep {
    pub t: f64,
    pub y: DVector<f64>,
    pub dy: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub max_steps: usize,
    /// Euclidean-norm threshold that triggers a divergence error.
    pub blowup_norm: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-9,
            atol: 1e-12,
            h_init: None,
            max_steps: 50_000_000,
            blowup_norm: None,
        }
    }
}

/// Terminal scalar event: integration stops where `function` changes sign,
/// located to `tol_t` in time by bisection on the dense output.
pub struct EventSpec<'a> {
    pub function: &'a dyn Fn(f64, &DVector<f64>) -> f64,
    pub tol_t: f64,
}

#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub steps: Vec<OdeStep>,
    pub stopped_by_event: bool,
    pub n_accepted: usize,
    pub n_rejected: usize,
    pub n_rhs_evals: usize,
}

impl OdeSolution {
    pub fn last(&self) -> &OdeStep {
        self.steps.last().expect("solution has at least one step")
    }

    /// Cubic-Hermite evaluation between stored steps.
    pub fn sample(&self, t: f64) -> DVector<f64> {
        let steps = &self.steps;
        if t <= steps[0].t {
            return steps[0].y.clone();
        }
        if t >= steps[steps.len() - 1].t {
            return steps[steps.len() - 1].y.clone();
        }
        let idx = match steps.binary_search_by(|s| s.t.partial_cmp(&t).unwrap()) {
            Ok(i) => return steps[i].y.clone(),
            Err(i) => i - 1,
        };
        hermite(&steps[idx], &steps[idx + 1], t)
    }
}

/// Cubic Hermite interpolant through two steps.
pub fn hermite(s0: &OdeStep, s1: &OdeStep, t: f64) -> DVector<f64> {
    let h = s1.t - s0.t;
    let th = (t - s0.t) / h;
    let t2 = th * th;
    let t3 = t2 * th;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + th;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    &s0.y * h00 + &s0.dy * (h10 * h) + &s1.y * h01 + &s1.dy * (h11 * h)
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate `y' = f(t, y)` from `t0` to `t_end` (`t_end > t0`).
pub fn integrate<F>(
    f: F,
    t0: f64,
    t_end: f64,
    y0: DVector<f64>,
    opts: &OdeOptions,
    event: Option<EventSpec<'_>>,
) -> Result<OdeSolution>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    assert!(t_end > t0);
    let mut evals = 0usize;
    let mut eval = |t: f64, y: &DVector<f64>| {
        evals += 1;
        f(t, y)
    };
    let mut t = t0;
    let mut y = y0;
    let mut k1 = eval(t, &y);
    let mut h = opts.h_init.unwrap_or_else(|| {
        let scale = y.norm().max(1.0);
        (1e-2 * scale / (k1.norm() + 1e-10)).min((t_end - t0) / 16.0)
    });
    h = h.min(t_end - t0).max(f64::MIN_POSITIVE);

    let mut steps = vec![OdeStep {
        t,
        y: y.clone(),
        dy: k1.clone(),
    }];
    let mut n_accepted = 0usize;
    let mut n_rejected = 0usize;
    let mut event_sign = event
        .as_ref()
        .map(|e| (e.function)(t, &y))
        .unwrap_or(0.0);

    while t < t_end {
        if n_accepted + n_rejected > opts.max_steps {
            return Err(Error::StepUnderflow { t });
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t });
        }
        h = h.min(t_end - t);

        let mut k = Vec::with_capacity(7);
        k.push(k1.clone());
        for stage in 0..6 {
            let mut yi = y.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = A[stage][j];
                if a != 0.0 {
                    yi += kj * (a * h);
                }
            }
            k.push(eval(t + C[stage] * h, &yi));
        }
        // 5th-order solution is the last stage state (FSAL).
        let mut y5 = y.clone();
        for (j, kj) in k.iter().take(6).enumerate() {
            let a = A[5][j];
            if a != 0.0 {
                y5 += kj * (a * h);
            }
        }
        let mut y4 = y.clone();
        for (j, kj) in k.iter().enumerate() {
            if B4[j] != 0.0 {
                y4 += kj * (B4[j] * h);
            }
        }
        // Scaled RMS error of the embedded difference.
        let mut err2 = 0.0;
        for i in 0..y.len() {
            let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
            let e = (y5[i] - y4[i]) / sc;
            err2 += e * e;
        }
        let err = (err2 / y.len() as f64).sqrt();

        if err <= 1.0 || h <= 1e-13 * t.abs().max(1.0) {
            let k7 = k[6].clone();
            let step = OdeStep {
                t: t + h,
                y: y5.clone(),
                dy: k7.clone(),
            };
            // Event localization before committing the step.
            if let Some(ev) = &event {
                let e_new = (ev.function)(step.t, &step.y);
                if event_sign != 0.0 && e_new != 0.0 && e_new.signum() != event_sign.signum() {
                    let prev = steps.last().unwrap().clone();
                    let (te, ye) = bisect_event(ev, &prev, &step, event_sign);
                    let dye = eval(te, &ye);
                    steps.push(OdeStep {
                        t: te,
                        y: ye,
                        dy: dye,
                    });
                    return Ok(OdeSolution {
                        steps,
                        stopped_by_event: true,
                        n_accepted: n_accepted + 1,
                        n_rejected,
                        n_rhs_evals: evals,
                    });
                }
                event_sign = e_new;
            }
            t += h;
            y = y5;
            k1 = k7;
            steps.push(step);
            n_accepted += 1;
            if let Some(limit) = opts.blowup_norm {
                let ny = y.norm();
                if ny > limit {
                    return Err(Error::Divergence {
                        t,
                        norm: ny,
                        limit,
                    });
                }
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            n_rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }

    Ok(OdeSolution {
        steps,
        stopped_by_event: false,
        n_accepted,
        n_rejected,
        n_rhs_evals: evals,
    })
}

fn bisect_event(
    ev: &EventSpec<'_>,
    s0: &OdeStep,
    s1: &OdeStep,
    sign0: f64,
) -> (f64, DVector<f64>) {
    let mut lo = s0.t;
    let mut hi = s1.t;
    while hi - lo > ev.tol_t {
        let mid = 0.5 * (lo + hi);
        let ym = hermite(s0, s1, mid);
        let em = (ev.function)(mid, &ym);
        if em == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if em.signum() == sign0.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let te = 0.5 * (lo + hi);
    (te, hermite(s0, s1, te))
}
