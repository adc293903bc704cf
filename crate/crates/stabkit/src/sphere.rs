//! Multistart projected-gradient minimization over the unit sphere of a
//! (possibly weighted) inner product, with Armijo backtracking and
//! normalization as the retraction.

use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;

use crate::operator::InnerProduct;
use crate::rng::normal_vector;

pub struct SphereProblem<'a> {
    pub dim: usize,
    pub ip: &'a InnerProduct,
    pub value: &'a dyn Fn(&DVector<f64>) -> f64,
    /// Euclidean gradient; finite differences are used when absent.
    pub gradient: Option<&'a dyn Fn(&DVector<f64>) -> DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct SphereMinimum {
    pub value: f64,
    pub point: DVector<f64>,
    pub starts: usize,
    pub iterations: usize,
}

fn normalize(ip: &InnerProduct, y: &DVector<f64>) -> Option<DVector<f64>> {
    let n = ip.norm(y);
    if n > 0.0 {
        Some(y / n)
    } else {
        None
    }
}

fn fd_gradient(f: &dyn Fn(&DVector<f64>) -> f64, y: &DVector<f64>) -> DVector<f64> {
    let n = y.len();
    let h = 1e-6;
    let mut g = DVector::zeros(n);
    let mut yp = y.clone();
    for i in 0..n {
        let base = y[i];
        yp[i] = base + h;
        let fp = f(&yp);
        yp[i] = base - h;
        let fm = f(&yp);
        yp[i] = base;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// One descent from a given start; returns (value, point, iterations).
fn descend(problem: &SphereProblem<'_>, start: DVector<f64>, max_iter: usize) -> (f64, DVector<f64>, usize) {
    let f = problem.value;
    let mut y = match normalize(problem.ip, &start) {
        Some(v) => v,
        None => return (f(&start), start, 0),
    };
    let mut fy = f(&y);
    let mut alpha = 1.0f64;
    let mut iters = 0;
    for _ in 0..max_iter {
        iters += 1;
        let g = match problem.gradient {
            Some(gr) => gr(&y),
            None => fd_gradient(f, &y),
        };
        // Project out the constraint normal P y.
        let py = problem.ip.apply_weight(&y);
        let denom = py.norm_squared();
        let g_tan = if denom > 0.0 {
            &g - &py * (g.dot(&py) / denom)
        } else {
            g.clone()
        };
        let gnorm2 = g_tan.norm_squared();
        if gnorm2 <= 1e-20 * (1.0 + fy * fy) {
            break;
        }
        // Armijo backtracking along the retracted ray.
        let mut accepted = false;
        let mut a = alpha;
        for _ in 0..60 {
            if let Some(cand) = normalize(problem.ip, &(&y - &g_tan * a)) {
                let fc = f(&cand);
                if fc <= fy - 1e-4 * a * gnorm2 {
                    y = cand;
                    fy = fc;
                    alpha = (a * 2.0).min(1e6);
                    accepted = true;
                    break;
                }
            }
            a *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (fy, y, iters)
}

/// Minimize over the unit sphere from `starts` random starts plus the given
/// warm starts. Ties are broken by the smaller value, then by lexicographic
/// comparison of the witness, so the result is deterministic under a fixed
/// seed.
pub fn minimize_on_sphere(
    problem: &SphereProblem<'_>,
    starts: usize,
    warm_starts: &[DVector<f64>],
    rng: &mut ChaCha8Rng,
    max_iter: usize,
) -> SphereMinimum {
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut total_iters = 0;
    let mut consider = |value: f64, point: DVector<f64>| {
        let better = match &best {
            None => true,
            Some((bv, bp)) => {
                if (value - bv).abs() > 1e-15 * (1.0 + bv.abs()) {
                    value < *bv
                } else {
                    lex_less(&point, bp)
                }
            }
        };
        if better {
            best = Some((value, point));
        }
    };
    let mut used = 0;
    for w in warm_starts {
        if w.norm() == 0.0 {
            continue;
        }
        let (v, p, it) = descend(problem, w.clone(), max_iter);
        total_iters += it;
        used += 1;
        consider(v, p);
    }
    for _ in 0..starts {
        let s = normal_vector(rng, problem.dim);
        let (v, p, it) = descend(problem, s, max_iter);
        total_iters += it;
        used += 1;
        consider(v, p);
    }
    let (value, point) = best.expect("at least one start");
    SphereMinimum {
        value,
        point,
        starts: used,
        iterations: total_iters,
    }
}

fn lex_less(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    for (x, y) in a.iter().zip(b.iter()) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}
