//! Observability-type certificates: lower bounds `delta` for the integral
//! functionals of `B` along the free semigroup over a horizon `T`.
//!
//! Four functional variants are supported:
//! - quadratic: `int <B S0(t) y, S0(t) y> dt >= delta |y|^2`,
//! - absolute: `int |<B S0(t) y, S0(t) y>| dt >= delta |y|^2`,
//! - l1-image: `int |B S0(t) y| dt >= delta |y|`,
//! - sqrt-form: `int |B^{1/2} S0(t) y|^2 dt >= delta |y|^2`
//!   (self-adjoint positive `B`; coincides with the quadratic variant).
//!
//! The quadratic variant reduces to a symmetric eigenvalue problem (the
//! Gramian) and is the only one reported as certified; the others are
//! sampled upper bounds on the true infimum and say so.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::grid::{self, Grid, StepFunction};
use crate::linalg::{self, TridiagSym};
use crate::operator::{ControlOp, Generator, InnerProduct, LinearOp, SystemModel};
use crate::rng::normal_vector;
use crate::semigroup::SemigroupEvaluator;
use crate::sphere::{minimize_on_sphere, SphereProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Quadratic,
    Absolute,
    L1Image,
    SqrtForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    GramEigenvalue,
    MultistartSphere,
    SampledLowerBound,
}

#[derive(Debug, Clone, Serialize)]
pub struct QuadratureMeta {
    pub nodes: usize,
    pub converged: bool,
    pub scheme: String,
}

/// Result of an observability check.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub variant: Variant,
    pub horizon_t: f64,
    pub delta: f64,
    pub method: Method,
    /// Only the Gramian eigenvalue route proves the bound; sampled routes
    /// produce upper bounds on the infimum and are never certified.
    pub certified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
    pub quadrature: QuadratureMeta,
}

impl Certificate {
    pub fn witness_vector(&self) -> Option<DVector<f64>> {
        self.witness.as_ref().map(|w| DVector::from_vec(w.clone()))
    }

    pub fn one_line(&self) -> String {
        format!(
            "{:?} T={} delta={:.6e} method={:?} certified={}",
            self.variant, self.horizon_t, self.delta, self.method, self.certified
        )
    }
}

/// Observability Gramian with structure: dense always available, tridiagonal
/// kept when the model is a shift/multiplication pair.
pub struct GramOperator {
    pub dense: DMatrix<f64>,
    pub tridiag: Option<TridiagSym>,
    pub meta: QuadratureMeta,
}

/// Assembles `W_T = int S0(t)' sym(B) S0(t) dt` in the model inner product:
/// the quadratic observability functional equals `y^T W_T y`.
///
/// Dense and modal generators use Gauss-Legendre quadrature with node
/// doubling until the matrix stabilizes; the transport pair (shift plus
/// multiplication) integrates the advected weight in closed form instead,
/// which is exact and avoids the kinks that defeat global quadrature.
pub fn gram_operator(model: &SystemModel, t_horizon: f64, quad_points: usize) -> Result<GramOperator> {
    if t_horizon <= 0.0 {
        return Err(Error::precondition("gram_operator: horizon must be positive"));
    }
    let control = match &model.control {
        ControlOp::Linear(l) => l,
        ControlOp::Nonlinear(_) => {
            return Err(Error::UnsupportedVariant(
                "gram_operator needs a linear control operator; use the multistart \
                 estimator for nonlinear B"
                    .into(),
            ))
        }
    };
    if let (Generator::Shift { grid }, LinearOp::MultiplyProfile { profile, .. }) =
        (&model.generator, control)
    {
        let w = grid::horizon_form(grid, profile, t_horizon);
        return Ok(GramOperator {
            dense: w.to_dense(),
            tridiag: Some(w),
            meta: QuadratureMeta {
                nodes: 0,
                converged: true,
                scheme: "exact-piecewise".into(),
            },
        });
    }
    if let (Generator::Shift { grid }, LinearOp::GridFiniteRank { directions, coefficients, .. }) =
        (&model.generator, control)
    {
        return shift_finite_rank_gram(grid, directions, coefficients, t_horizon, quad_points);
    }

    let n = model.dim();
    let b = control.to_dense().ok_or_else(|| {
        Error::UnsupportedVariant("gram_operator: control operator has no matrix form".into())
    })?;
    let p = model.inner.weight_dense(n);
    let mut q_sym = &p * &b;
    q_sym = 0.5 * (&q_sym + q_sym.transpose());
    let evaluator = SemigroupEvaluator::new(model.generator.clone());

    let assemble = |nodes: usize| -> Result<DMatrix<f64>> {
        let (ts, ws) = linalg::gauss_legendre(nodes, 0.0, t_horizon);
        let mut w = DMatrix::zeros(n, n);
        for (t, wt) in ts.iter().zip(&ws) {
            let s = evaluator.matrix(*t)?;
            w += (s.transpose() * &q_sym * &s) * *wt;
        }
        Ok(w)
    };

    let mut nodes = quad_points.max(2);
    let mut current = assemble(nodes)?;
    let mut converged = false;
    while nodes * 2 <= 1024 {
        let refined = assemble(nodes * 2)?;
        let diff = (&refined - &current).amax();
        let floor = 1e-10f64.max(1e-14 * refined.amax());
        current = refined;
        nodes *= 2;
        if diff < floor {
            converged = true;
            break;
        }
    }
    let worst_asym = linalg::symmetrize(&mut current);
    debug_assert!(worst_asym <= 1e-12);
    Ok(GramOperator {
        dense: current,
        tridiag: None,
        meta: QuadratureMeta {
            nodes,
            converged,
            scheme: "gauss-legendre".into(),
        },
    })
}

/// Gramian for the finite-rank transport control operator
/// `B y = sum_j c_j <y, phi_j> phi_j`: the functional is
/// `sum_j c_j <S0(t) y, phi_j>^2`, assembled from the exact linear
/// functionals of the shifted state.
fn shift_finite_rank_gram(
    grid: &Grid,
    directions: &[DVector<f64>],
    coefficients: &[f64],
    t_horizon: f64,
    quad_points: usize,
) -> Result<GramOperator> {
    let n = grid.n;
    let assemble = |nodes: usize| -> DMatrix<f64> {
        let (ts, ws) = linalg::gauss_legendre(nodes, 0.0, t_horizon);
        let mut w = DMatrix::zeros(n, n);
        for (t, wt) in ts.iter().zip(&ws) {
            for (dir, c) in directions.iter().zip(coefficients) {
                let v = backshift_functional(grid, dir, *t);
                w += (&v * v.transpose()) * (*c * *wt);
            }
        }
        w
    };
    let mut nodes = quad_points.max(2);
    let mut current = assemble(nodes);
    let mut converged = false;
    while nodes * 2 <= 1024 {
        let refined = assemble(nodes * 2);
        let diff = (&refined - &current).amax();
        let floor = 1e-10f64.max(1e-14 * refined.amax());
        current = refined;
        nodes *= 2;
        if diff < floor {
            converged = true;
            break;
        }
    }
    linalg::symmetrize(&mut current);
    Ok(GramOperator {
        dense: current,
        tridiag: None,
        meta: QuadratureMeta {
            nodes,
            converged,
            scheme: "gauss-legendre".into(),
        },
    })
}

/// Gradient vector of `y -> <S0(t) y, f>_L2` for the shift semigroup:
/// component `m` is the exact integral of the hat at node `m` against `f`
/// displaced left by `t`.
fn backshift_functional(grid: &Grid, f: &DVector<f64>, t: f64) -> DVector<f64> {
    const GA: f64 = 0.211_324_865_405_187_12;
    const GB: f64 = 0.788_675_134_594_812_9;
    DVector::from_fn(grid.n, |m, _| {
        let lo = (grid.node(m) - grid.h).max(0.0);
        let hi = (grid.node(m) + grid.h).min(grid.x_max());
        if hi <= lo {
            return 0.0;
        }
        // Breakpoints: this hat's node and the displaced grid nodes of f.
        let mut pts = vec![lo, hi];
        if grid.node(m) > lo && grid.node(m) < hi {
            pts.push(grid.node(m));
        }
        let k_lo = ((lo + t) / grid.h).floor() as i64;
        let k_hi = ((hi + t) / grid.h).ceil() as i64;
        for k in k_lo..=k_hi {
            let x = k as f64 * grid.h - t;
            if x > lo && x < hi {
                pts.push(x);
            }
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut acc = 0.0;
        for seg in pts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let len = b - a;
            if len <= 0.0 {
                continue;
            }
            for frac in [GA, GB] {
                let x = a + frac * len;
                let hat = 1.0 - ((x - grid.node(m)).abs() / grid.h);
                acc += 0.5 * len * hat.max(0.0) * grid.eval(f, x + t);
            }
        }
        acc
    })
}

/// Certified quadratic-variant bound: smallest eigenvalue of the Gramian in
/// the model inner product. `delta <= 0` signals that the inequality fails
/// at this horizon.
pub fn certify_quadratic(model: &SystemModel, t_horizon: f64, cfg: &Config) -> Result<Certificate> {
    let gram = gram_operator(model, t_horizon, cfg.quad_points)?;
    let (delta, witness) = match (&gram.tridiag, &model.inner) {
        (Some(w), InnerProduct::Tridiag(mass)) => w.pencil_min_eigen(mass),
        _ => match &model.inner {
            InnerProduct::Identity => linalg::min_symmetric_eig(&gram.dense),
            ip => linalg::pencil_min_eigen(&gram.dense, &ip.weight_dense(model.dim()))?,
        },
    };
    let nw = model.inner.norm(&witness);
    let witness = if nw > 0.0 { &witness / nw } else { witness };
    Ok(Certificate {
        variant: Variant::Quadratic,
        horizon_t: t_horizon,
        delta,
        method: Method::GramEigenvalue,
        certified: true,
        witness: Some(witness.as_slice().to_vec()),
        quadrature: gram.meta,
    })
}

/// Per-node functional data along the free trajectory `S0(t) y`.
enum ObservationPath {
    /// Dense/modal models: `q_k = y' Q_k y`, `m_k = y' R_k y`.
    Forms {
        q: Vec<DMatrix<f64>>,
        r: Vec<DMatrix<f64>>,
    },
    /// Transport multiplication pair: advected step weights.
    ShiftMult {
        grid: Grid,
        profile: StepFunction,
        squared: StepFunction,
        times: Vec<f64>,
    },
    /// Transport finite-rank operator: exact shifted functionals.
    ShiftRank {
        grid: Grid,
        directions: Vec<DVector<f64>>,
        coefficients: Vec<f64>,
        times: Vec<f64>,
    },
    /// Nonlinear control operator: direct evaluation along the semigroup.
    NonlinearEval {
        evaluator: SemigroupEvaluator,
        times: Vec<f64>,
    },
}

struct FunctionalQuadrature {
    weights: Vec<f64>,
    path: ObservationPath,
    nodes: usize,
}

fn build_path(model: &SystemModel, t_horizon: f64, nodes: usize) -> Result<FunctionalQuadrature> {
    let (ts, ws) = linalg::gauss_legendre(nodes, 0.0, t_horizon);
    let path = match (&model.generator, &model.control) {
        (Generator::Shift { grid }, ControlOp::Linear(LinearOp::MultiplyProfile { profile, .. })) => {
            ObservationPath::ShiftMult {
                grid: *grid,
                profile: profile.clone(),
                squared: profile.squared(),
                times: ts,
            }
        }
        (
            Generator::Shift { grid },
            ControlOp::Linear(LinearOp::GridFiniteRank {
                directions,
                coefficients,
                ..
            }),
        ) => ObservationPath::ShiftRank {
            grid: *grid,
            directions: directions.clone(),
            coefficients: coefficients.clone(),
            times: ts,
        },
        (_, ControlOp::Linear(l)) => {
            let n = model.dim();
            let b = l.to_dense().ok_or_else(|| {
                Error::UnsupportedVariant("control operator has no matrix form".into())
            })?;
            let p = model.inner.weight_dense(n);
            let mut q_sym = &p * &b;
            q_sym = 0.5 * (&q_sym + q_sym.transpose());
            let r_core = b.transpose() * &p * &b;
            let evaluator = SemigroupEvaluator::new(model.generator.clone());
            let mut q = Vec::with_capacity(nodes);
            let mut r = Vec::with_capacity(nodes);
            for t in &ts {
                let s = evaluator.matrix(*t)?;
                q.push(s.transpose() * &q_sym * &s);
                r.push(s.transpose() * &r_core * &s);
            }
            ObservationPath::Forms { q, r }
        }
        (_, ControlOp::Nonlinear(_)) => ObservationPath::NonlinearEval {
            evaluator: SemigroupEvaluator::new(model.generator.clone()),
            times: ts,
        },
    };
    Ok(FunctionalQuadrature {
        weights: ws,
        path,
        nodes,
    })
}

impl FunctionalQuadrature {
    /// `<B S0(t_k) y, S0(t_k) y>_P` at node `k`.
    fn coupling_at(&self, model: &SystemModel, k: usize, y: &DVector<f64>) -> f64 {
        match &self.path {
            ObservationPath::Forms { q, .. } => (&q[k] * y).dot(y),
            ObservationPath::ShiftMult { grid, profile, times, .. } => {
                grid::weighted_dot(grid, profile, times[k], y, y)
            }
            ObservationPath::ShiftRank {
                grid,
                directions,
                coefficients,
                times,
            } => directions
                .iter()
                .zip(coefficients)
                .map(|(d, c)| {
                    let v = backshift_functional(grid, d, times[k]);
                    c * v.dot(y) * v.dot(y)
                })
                .sum(),
            ObservationPath::NonlinearEval { evaluator, times } => {
                let sy = evaluator.eval(times[k], y).expect("semigroup evaluation");
                model.inner.dot(&model.control.apply(&sy), &sy)
            }
        }
    }

    /// `|B S0(t_k) y|_P^2` at node `k`.
    fn image_norm2_at(&self, model: &SystemModel, k: usize, y: &DVector<f64>) -> f64 {
        match &self.path {
            ObservationPath::Forms { r, .. } => (&r[k] * y).dot(y),
            ObservationPath::ShiftMult { grid, squared, times, .. } => {
                grid::weighted_dot(grid, squared, times[k], y, y)
            }
            ObservationPath::ShiftRank {
                grid,
                directions,
                coefficients,
                times,
            } => directions
                .iter()
                .zip(coefficients)
                .map(|(d, c)| {
                    let v = backshift_functional(grid, d, times[k]);
                    let proj = v.dot(y);
                    c * c * proj * proj
                })
                .sum(),
            ObservationPath::NonlinearEval { evaluator, times } => {
                let sy = evaluator.eval(times[k], y).expect("semigroup evaluation");
                let bsy = model.control.apply(&sy);
                model.inner.dot(&bsy, &bsy)
            }
        }
    }

    fn absolute_value(&self, model: &SystemModel, y: &DVector<f64>) -> f64 {
        (0..self.nodes)
            .map(|k| self.weights[k] * self.coupling_at(model, k, y).abs())
            .sum()
    }

    fn l1_value(&self, model: &SystemModel, y: &DVector<f64>) -> f64 {
        (0..self.nodes)
            .map(|k| self.weights[k] * self.image_norm2_at(model, k, y).max(0.0).sqrt())
            .sum()
    }

    fn quadratic_value(&self, model: &SystemModel, y: &DVector<f64>) -> f64 {
        (0..self.nodes)
            .map(|k| self.weights[k] * self.coupling_at(model, k, y))
            .sum()
    }

    /// Euclidean gradients when form matrices are available.
    fn absolute_gradient(&self, model: &SystemModel, y: &DVector<f64>) -> Option<DVector<f64>> {
        match &self.path {
            ObservationPath::Forms { q, .. } => {
                let mut g = DVector::zeros(y.len());
                for k in 0..self.nodes {
                    let qy = &q[k] * y;
                    let sign = qy.dot(y).signum();
                    g += qy * (2.0 * sign * self.weights[k]);
                }
                Some(g)
            }
            ObservationPath::ShiftMult { grid, profile, times, .. } => {
                let mut g = DVector::zeros(y.len());
                for k in 0..self.nodes {
                    let form = grid::weighted_form(grid, profile, times[k]);
                    let fy = form.mul_vec(y);
                    let sign = fy.dot(y).signum();
                    g += fy * (2.0 * sign * self.weights[k]);
                }
                Some(g)
            }
            _ => None,
        }
    }

    fn l1_gradient(&self, model: &SystemModel, y: &DVector<f64>) -> Option<DVector<f64>> {
        match &self.path {
            ObservationPath::Forms { r, .. } => {
                let mut g = DVector::zeros(y.len());
                for k in 0..self.nodes {
                    let ry = &r[k] * y;
                    let val = ry.dot(y).max(0.0).sqrt();
                    if val > 1e-14 {
                        g += ry * (self.weights[k] / val);
                    }
                }
                Some(g)
            }
            ObservationPath::ShiftMult { grid, squared, times, .. } => {
                let mut g = DVector::zeros(y.len());
                for k in 0..self.nodes {
                    let form = grid::weighted_form(grid, squared, times[k]);
                    let fy = form.mul_vec(y);
                    let val = fy.dot(y).max(0.0).sqrt();
                    if val > 1e-14 {
                        g += fy * (self.weights[k] / val);
                    }
                }
                Some(g)
            }
            _ => None,
        }
    }

    fn quadratic_gradient(&self, _model: &SystemModel, y: &DVector<f64>) -> Option<DVector<f64>> {
        match &self.path {
            ObservationPath::Forms { q, .. } => {
                let mut g = DVector::zeros(y.len());
                for k in 0..self.nodes {
                    g += (&q[k] * y) * (2.0 * self.weights[k]);
                }
                Some(g)
            }
            _ => None,
        }
    }
}

/// Sampled bound for the non-quadratic variants by multistart projected
/// gradient descent on the unit sphere. Never certified: the result is an
/// upper bound on the true infimum, reported as such.
pub fn estimate_nonquadratic(
    model: &SystemModel,
    t_horizon: f64,
    variant: Variant,
    starts: usize,
    rng: &mut ChaCha8Rng,
    cfg: &Config,
) -> Result<Certificate> {
    if starts == 0 {
        return Err(Error::precondition("estimate_nonquadratic: starts >= 1"));
    }
    if !matches!(variant, Variant::Absolute | Variant::L1Image) {
        return Err(Error::UnsupportedVariant(format!(
            "estimate_nonquadratic handles absolute and l1-image variants, got {variant:?}"
        )));
    }
    let quadrature = build_path(model, t_horizon, (cfg.quad_points * 2).max(128))?;
    let value = |y: &DVector<f64>| match variant {
        Variant::Absolute => quadrature.absolute_value(model, y),
        Variant::L1Image => quadrature.l1_value(model, y),
        _ => unreachable!(),
    };
    let has_forms = matches!(
        quadrature.path,
        ObservationPath::Forms { .. } | ObservationPath::ShiftMult { .. }
    );
    let gradient = |y: &DVector<f64>| match variant {
        Variant::Absolute => quadrature.absolute_gradient(model, y).unwrap(),
        Variant::L1Image => quadrature.l1_gradient(model, y).unwrap(),
        _ => unreachable!(),
    };

    // Warm starts: mutually orthogonal random directions plus the quadratic
    // witness when a Gramian exists.
    let mut warm: Vec<DVector<f64>> = Vec::new();
    if model.control.is_linear() {
        if let Ok(cert) = certify_quadratic(model, t_horizon, cfg) {
            if let Some(w) = cert.witness_vector() {
                warm.push(w);
            }
        }
    }
    let n = model.dim();
    let k = starts.min(n);
    let g = DMatrix::from_fn(n, k, |_, _| {
        use rand::Rng;
        rng.gen_range(-1.0..1.0)
    });
    let qmat = g.qr().q();
    for j in 0..k.min(qmat.ncols()) {
        warm.push(qmat.column(j).into_owned());
    }
    let extra_random = starts.saturating_sub(k);

    let problem = SphereProblem {
        dim: n,
        ip: &model.inner,
        value: &value,
        gradient: if has_forms {
            Some(&gradient)
        } else {
            None
        },
    };
    let min = minimize_on_sphere(&problem, extra_random, &warm, rng, 400);

    Ok(Certificate {
        variant,
        horizon_t: t_horizon,
        delta: min.value,
        method: Method::MultistartSphere,
        certified: false,
        witness: Some(min.point.as_slice().to_vec()),
        quadrature: QuadratureMeta {
            nodes: quadrature.nodes,
            converged: true,
            scheme: "gauss-legendre".into(),
        },
    })
}

/// Sampled lower-bound estimate of the quadratic functional for nonlinear
/// control operators (no Gramian exists): minimum over random unit states.
pub fn sampled_quadratic_delta(
    model: &SystemModel,
    t_horizon: f64,
    samples: usize,
    rng: &mut ChaCha8Rng,
    cfg: &Config,
) -> Result<Certificate> {
    let quadrature = build_path(model, t_horizon, (cfg.quad_points * 2).max(128))?;
    let mut best = f64::INFINITY;
    let mut witness = DVector::zeros(model.dim());
    for _ in 0..samples.max(1) {
        let y = normal_vector(rng, model.dim());
        let nrm = model.inner.norm(&y);
        if nrm == 0.0 {
            continue;
        }
        let y = y / nrm;
        let v = quadrature.quadratic_value(model, &y);
        if v < best {
            best = v;
            witness = y;
        }
    }
    Ok(Certificate {
        variant: Variant::Quadratic,
        horizon_t: t_horizon,
        delta: best,
        method: Method::SampledLowerBound,
        certified: false,
        witness: Some(witness.as_slice().to_vec()),
        quadrature: QuadratureMeta {
            nodes: quadrature.nodes,
            converged: true,
            scheme: "gauss-legendre".into(),
        },
    })
}

/// Value of a variant functional at one state (used for witness propagation
/// and the pointwise implication checks).
pub fn functional_value(
    model: &SystemModel,
    t_horizon: f64,
    variant: Variant,
    y: &DVector<f64>,
    cfg: &Config,
) -> Result<f64> {
    let quadrature = build_path(model, t_horizon, (cfg.quad_points * 2).max(128))?;
    Ok(match variant {
        Variant::Quadratic | Variant::SqrtForm => quadrature.quadratic_value(model, y),
        Variant::Absolute => quadrature.absolute_value(model, y),
        Variant::L1Image => quadrature.l1_value(model, y),
    })
}

/// Square root of a self-adjoint positive operator in the model geometry.
pub fn sqrt_operator(model: &SystemModel) -> Result<DMatrix<f64>> {
    let b = model
        .control
        .linear()
        .and_then(|l| l.to_dense())
        .ok_or_else(|| {
            Error::precondition("sqrt-form needs a matrix-backed linear control operator")
        })?;
    let n = b.nrows();
    let p = model.inner.weight_dense(n);
    // Work in P-orthonormal coordinates: B~ = L^T B L^{-T} must be symmetric PSD.
    let chol = p
        .cholesky()
        .ok_or_else(|| Error::precondition("inner-product weight is not positive definite"))?;
    let l = chol.l();
    let mut bt = l.transpose() * &b;
    bt = bt * l.transpose().try_inverse().ok_or_else(|| {
        Error::precondition("inner-product factor is singular")
    })?;
    let asym = (&bt - bt.transpose()).amax() / bt.amax().max(1e-300);
    if asym > 1e-10 {
        return Err(Error::precondition(format!(
            "sqrt-form needs a self-adjoint control operator (relative asymmetry {asym:.2e})"
        )));
    }
    let mut bt_sym = bt;
    linalg::symmetrize(&mut bt_sym);
    let half = linalg::spd_sqrt(&bt_sym, 1e-10)?;
    // Back-transform: B^{1/2} = L^{-T} half L^T.
    let linv_t = l.transpose().try_inverse().unwrap();
    Ok(&linv_t * half * l.transpose())
}

/// Certificate for the square-root form. Computes `B^{1/2}` explicitly,
/// certifies the quadratic variant of the model driven by
/// `(B^{1/2})' B^{1/2}` and checks that it agrees with the direct quadratic
/// certificate (the two coincide for self-adjoint positive `B`).
pub fn sqrt_form_certificate(model: &SystemModel, t_horizon: f64, cfg: &Config) -> Result<Certificate> {
    let half = sqrt_operator(model)?;
    let n = half.nrows();
    let p = model.inner.weight_dense(n);
    // Effective operator (B^{1/2})' B^{1/2} in the P geometry:
    // P-adjoint of M is P^{-1} M^T P, so the product is P^{-1} H^T P H.
    let pth = &p * &half;
    let prod = half.transpose() * &pth;
    let lu = p.lu();
    let b_eff = lu
        .solve(&prod)
        .ok_or_else(|| Error::precondition("inner-product weight is singular"))?;
    let mut effective = model.clone();
    effective.control = ControlOp::Linear(LinearOp::Dense(b_eff));
    let mut cert = certify_quadratic(&effective, t_horizon, cfg)?;
    let direct = certify_quadratic(model, t_horizon, cfg)?;
    let scale = 1.0f64.max(direct.delta.abs());
    if (cert.delta - direct.delta).abs() > 1e-9 * scale {
        return Err(Error::precondition(format!(
            "sqrt-form and quadratic certificates disagree: {} vs {}",
            cert.delta, direct.delta
        )));
    }
    cert.variant = Variant::SqrtForm;
    Ok(cert)
}

/// Closed-form necessary-condition constant
/// `delta = (1 - M e^{-sigma T}) / (2 M |lambda|) * (1 + |lambda| T |B| e^{|lambda| T |B|})^{-1}`.
pub fn necessity_delta(m_env: f64, sigma: f64, lambda: f64, t_horizon: f64, norm_b: f64) -> Result<f64> {
    if m_env < 1.0 || sigma <= 0.0 || lambda == 0.0 || norm_b < 0.0 {
        return Err(Error::precondition(
            "necessity_delta needs M >= 1, sigma > 0, lambda != 0, |B| >= 0",
        ));
    }
    if t_horizon <= m_env.ln() / sigma {
        return Err(Error::precondition(format!(
            "necessity_delta degenerates for T <= ln(M)/sigma = {:.6}",
            m_env.ln() / sigma
        )));
    }
    let lead = (1.0 - m_env * (-sigma * t_horizon).exp()) / (2.0 * m_env * lambda.abs());
    let amplification = 1.0 + lambda.abs() * t_horizon * norm_b * (lambda.abs() * t_horizon * norm_b).exp();
    Ok(lead / amplification)
}

/// Geometric horizon sweep: certificates at `t_min * factor^k <= t_max`.
pub fn sweep_horizons(
    model: &SystemModel,
    t_min: f64,
    t_max: f64,
    factor: f64,
    cfg: &Config,
) -> Result<Vec<Certificate>> {
    if !(t_min > 0.0 && t_max >= t_min && factor > 1.0) {
        return Err(Error::precondition("sweep needs 0 < t_min <= t_max and factor > 1"));
    }
    let mut out = Vec::new();
    let mut t = t_min;
    while t <= t_max * (1.0 + 1e-12) {
        out.push(certify_quadratic(model, t, cfg)?);
        t *= factor;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{Dimension, SemigroupClass};
    use crate::rng::seeded;
    use approx::assert_relative_eq;

    fn dense_model(name: &str, a: DMatrix<f64>, b: DMatrix<f64>) -> SystemModel {
        let dim = a.nrows();
        SystemModel {
            name: name.into(),
            generator: Generator::Dense(a),
            control: ControlOp::Linear(LinearOp::Dense(b)),
            inner: InnerProduct::Identity,
            semigroup_class: SemigroupClass::Unknown,
            dimension: Dimension::Finite(dim),
            lipschitz: None,
        }
    }

    #[test]
    fn identity_pair_gram_is_t_times_identity() {
        let model = dense_model("iid", DMatrix::zeros(3, 3), DMatrix::identity(3, 3));
        let g = gram_operator(&model, 2.5, 64).unwrap();
        assert_relative_eq!((g.dense - DMatrix::identity(3, 3) * 2.5).amax(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gram_matches_trapezoid_oracle_on_random_skew_pair() {
        use rand::Rng;
        let mut rng = seeded(23);
        let mut a = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
        a = &a - a.transpose(); // skew
        let b = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
        let model = dense_model("skew", a.clone(), b.clone());
        let g = gram_operator(&model, 1.0, 64).unwrap();
        // Independent quadrature: fine trapezoid on <B e^{tA} y, e^{tA} y>.
        for _ in 0..10 {
            let y = normal_vector(&mut rng, 3);
            let direct = {
                let steps = 20_000;
                let dt = 1.0 / steps as f64;
                let mut acc = 0.0;
                for k in 0..=steps {
                    let t = k as f64 * dt;
                    let e = crate::semigroup::matrix_exponential(&a, t).unwrap();
                    let ey = &e * &y;
                    let v = (&b * &ey).dot(&ey);
                    let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
                    acc += w * v * dt;
                }
                acc
            };
            let via_gram = (&g.dense * &y).dot(&y);
            assert_relative_eq!(via_gram, direct, epsilon = 1e-7, max_relative = 1e-7);
        }
    }

    #[test]
    fn quadratic_certificate_identity_pair() {
        let model = dense_model("iid", DMatrix::zeros(2, 2), DMatrix::identity(2, 2));
        let cert = certify_quadratic(&model, 3.0, &Config::default()).unwrap();
        assert!(cert.certified);
        assert_relative_eq!(cert.delta, 3.0, max_relative = 1e-12);
        let w = cert.witness_vector().unwrap();
        assert_relative_eq!(w.norm(), 1.0, max_relative = 1e-10);
    }

    #[test]
    fn jordan_pair_negative_then_positive_delta() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let model = dense_model("jordan", a, b);
        let small = certify_quadratic(&model, 1.0, &Config::default()).unwrap();
        assert!(small.delta <= 0.0, "delta(1) = {}", small.delta);
        let large = certify_quadratic(&model, 20.0, &Config::default()).unwrap();
        assert!(large.delta > 0.0, "delta(20) = {}", large.delta);
        // Closed-form Gramian: [[T, T^2/2], [T^2/2, T^3/3 - T]].
        let t = 20.0f64;
        let w_exact = DMatrix::from_row_slice(
            2,
            2,
            &[t, t * t / 2.0, t * t / 2.0, t * t * t / 3.0 - t],
        );
        let (expected, _) = linalg::min_symmetric_eig(&w_exact);
        assert_relative_eq!(large.delta, expected, max_relative = 1e-9);
    }

    #[test]
    fn l1_estimate_identity_pair_is_horizon() {
        let model = dense_model("iid", DMatrix::zeros(2, 2), DMatrix::identity(2, 2));
        let cert = estimate_nonquadratic(
            &model,
            2.0,
            Variant::L1Image,
            8,
            &mut seeded(3),
            &Config::default(),
        )
        .unwrap();
        assert!(!cert.certified);
        assert_relative_eq!(cert.delta, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn rotation_operator_absolute_zero_l1_positive() {
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let model = dense_model("rot", DMatrix::zeros(2, 2), b);
        let cfg = Config::default();
        let absolute = estimate_nonquadratic(
            &model,
            1.0,
            Variant::Absolute,
            8,
            &mut seeded(4),
            &cfg,
        )
        .unwrap();
        assert!(absolute.delta.abs() <= 1e-10, "skew coupling vanishes identically");
        let l1 = estimate_nonquadratic(&model, 1.0, Variant::L1Image, 8, &mut seeded(5), &cfg)
            .unwrap();
        // Rotations are isometries, so the image functional is exactly T.
        assert_relative_eq!(l1.delta, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn sqrt_operator_of_diagonal() {
        let model = dense_model(
            "diag",
            DMatrix::zeros(2, 2),
            DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]),
        );
        let half = sqrt_operator(&model).unwrap();
        assert_relative_eq!(half[(0, 0)], 2.0, max_relative = 1e-12);
        assert_relative_eq!(half[(1, 1)], 3.0, max_relative = 1e-12);
        let ident = dense_model("eye", DMatrix::zeros(2, 2), DMatrix::identity(2, 2));
        let ihalf = sqrt_operator(&ident).unwrap();
        assert_relative_eq!((ihalf - DMatrix::identity(2, 2)).amax(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sqrt_form_agrees_with_quadratic_on_random_spd() {
        use rand::Rng;
        let mut rng = seeded(6);
        let mut a = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        a = &a - a.transpose();
        let g = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let b = &g * g.transpose() + DMatrix::identity(4, 4) * 0.1;
        let model = dense_model("spd", a, b);
        let cfg = Config::default();
        let sqrt_cert = sqrt_form_certificate(&model, 1.5, &cfg).unwrap();
        let quad = certify_quadratic(&model, 1.5, &cfg).unwrap();
        assert!((sqrt_cert.delta - quad.delta).abs() <= 1e-9 * quad.delta.abs().max(1.0));
        assert_eq!(sqrt_cert.variant, Variant::SqrtForm);
    }

    #[test]
    fn sqrt_form_rejects_non_self_adjoint() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 4.0, 0.0, 4.0]);
        let model = dense_model("nonsym", DMatrix::zeros(2, 2), b);
        assert!(sqrt_form_certificate(&model, 1.0, &Config::default()).is_err());
    }

    #[test]
    fn necessity_delta_closed_forms() {
        // |B| = 0 degenerate plumbing case: (1 - e^{-1}) / 2.
        let d = necessity_delta(1.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert_relative_eq!(d, (1.0 - (-1.0f64).exp()) / 2.0, max_relative = 1e-12);
        // M = 1, sigma = ln 2, T = 1, lambda = 1, |B| = 1:
        // (1/2) / 2 * 1/(1 + e).
        let d2 = necessity_delta(1.0, 2.0f64.ln(), 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(d2, 0.25 / (1.0 + std::f64::consts::E), max_relative = 1e-12);
        assert_relative_eq!(d2, 0.06723, epsilon = 5e-6);
    }

    #[test]
    fn necessity_delta_monotone_tail_to_zero() {
        let mut prev = f64::INFINITY;
        for t in [2.0, 4.0, 8.0, 16.0, 32.0, 64.0] {
            let d = necessity_delta(1.5, 0.8, 1.0, t, 0.5).unwrap();
            assert!(d > 0.0 && d < prev);
            prev = d;
        }
        assert!(prev < 1e-8, "tail should vanish, got {prev}");
    }

    #[test]
    fn necessity_delta_rejects_degenerate_horizon() {
        assert!(necessity_delta(2.0, 1.0, 1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn gram_eigen_vs_multistart_small_model() {
        use rand::Rng;
        let mut rng = seeded(7);
        let mut a = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
        a = &a - a.transpose();
        let b = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-0.5..0.5))
            + DMatrix::identity(3, 3);
        let model = dense_model("cmp", a, b);
        let cfg = Config::default();
        let cert = certify_quadratic(&model, 1.0, &cfg).unwrap();
        // Multistart minimization of the quadratic functional itself.
        let quadrature = build_path(&model, 1.0, 128).unwrap();
        let value = |y: &DVector<f64>| quadrature.quadratic_value(&model, y);
        let gradient = |y: &DVector<f64>| quadrature.quadratic_gradient(&model, y).unwrap();
        let problem = SphereProblem {
            dim: 3,
            ip: &model.inner,
            value: &value,
            gradient: Some(&gradient),
        };
        let min = minimize_on_sphere(&problem, 16, &[], &mut seeded(8), 400);
        assert!((min.value - cert.delta).abs() <= 1e-5 * cert.delta.abs().max(1.0));
    }
}
