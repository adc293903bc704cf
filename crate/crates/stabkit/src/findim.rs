//! Algebraic stabilizability tests for matrix systems: Lyapunov inequality
//! and equality structure, iterated-bracket rank condition, sign
//! classification of `P B`, and the consistency check between the temporal
//! observability condition and the sampled absolute-variant bound.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::certify::{self, Variant};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::{ControlOp, Dimension, Generator, InnerProduct, LinearOp, SemigroupClass, SystemModel};
use crate::rng::normal_vector;
use crate::semigroup::SemigroupEvaluator;
use crate::sphere::{minimize_on_sphere, SphereProblem};

/// Outcome of the Lyapunov-inequality feasibility search. The projection
/// method cannot prove infeasibility, so a non-convergent search is
/// `Undecided`; `Infeasible` is only reported with spectral evidence.
#[derive(Debug, Clone)]
pub enum LmiOutcome {
    Feasible(DMatrix<f64>),
    Infeasible { reason: String },
    Undecided { residual: f64 },
}

impl LmiOutcome {
    pub fn matrix(&self) -> Option<&DMatrix<f64>> {
        match self {
            LmiOutcome::Feasible(p) => Some(p),
            _ => None,
        }
    }
}

fn vech_len(n: usize) -> usize {
    n * (n + 1) / 2
}

fn unvech(n: usize, v: &DVector<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            m[(i, j)] = v[k];
            m[(j, i)] = v[k];
            k += 1;
        }
    }
    m
}

/// Matrix of the map `vech(P) -> vec(A^T P + P A)` over symmetric `P`.
fn lyapunov_map_matrix(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = vech_len(n);
    let mut k_mat = DMatrix::zeros(n * n, m);
    let mut col = 0;
    for i in 0..n {
        for j in i..n {
            let mut basis = DMatrix::zeros(n, n);
            basis[(i, j)] = 1.0;
            basis[(j, i)] = 1.0;
            let image = a.transpose() * &basis + &basis * a;
            for (idx, val) in image.iter().enumerate() {
                k_mat[(idx, col)] = *val;
            }
            col += 1;
        }
    }
    k_mat
}

/// Searches for `P = P^T > 0` with `A^T P + P A <= 0` by alternating
/// projections between the Lyapunov cone (eigenvalue clamp in image space,
/// pulled back by least squares) and the box `eps I <= P, |P| <= 1`.
pub fn lyapunov_lmi_feasible(a: &DMatrix<f64>) -> Result<LmiOutcome> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::precondition("lyapunov_lmi_feasible: A must be square"));
    }
    // Spectral evidence of infeasibility: eigenvalues in the open right half
    // plane, or semigroup norm growth (defective imaginary spectrum).
    let eigs = a.complex_eigenvalues();
    if eigs.iter().any(|e| e.re > 1e-9) {
        return Ok(LmiOutcome::Infeasible {
            reason: format!(
                "spectral abscissa {:.3e} > 0: no Lyapunov-contractive norm exists",
                eigs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max)
            ),
        });
    }
    let norm_at = |t: f64| -> Result<f64> {
        Ok(crate::semigroup::matrix_exponential(a, t)?
            .svd(false, false)
            .singular_values[0])
    };
    let m10 = norm_at(10.0)?;
    let m100 = norm_at(100.0)?;
    if m100 > 3.0 * m10.max(1.0) && m100 > 2.0 {
        return Ok(LmiOutcome::Infeasible {
            reason: format!(
                "semigroup norm grows (|e^(10A)| = {m10:.3e}, |e^(100A)| = {m100:.3e}): \
                 no bounded-contraction norm exists"
            ),
        });
    }

    const EPS_PD: f64 = 1e-6;
    let k_mat = lyapunov_map_matrix(a);
    let svd = k_mat.clone().svd(true, true);
    let mut p = DMatrix::identity(n, n);
    let mut residual = f64::INFINITY;
    for _ in 0..500 {
        // Project the image onto the negative-semidefinite cone.
        let q = a.transpose() * &p + &p * a;
        let mut eig = q.clone().symmetric_eigen();
        for v in eig.eigenvalues.iter_mut() {
            *v = v.min(0.0);
        }
        let q_minus =
            &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues) * eig.eigenvectors.transpose();
        // Pull the correction back to symmetric P by least squares.
        let target = DVector::from_iterator(n * n, q_minus.iter().cloned());
        let sol = svd.solve(&target, 1e-12).map_err(Error::Precondition)?;
        p = unvech(n, &sol);
        // Project onto the positive-definite box.
        let mut peig = p.clone().symmetric_eigen();
        for v in peig.eigenvalues.iter_mut() {
            *v = v.clamp(EPS_PD, 1.0);
        }
        p = &peig.eigenvectors
            * DMatrix::from_diagonal(&peig.eigenvalues)
            * peig.eigenvectors.transpose();
        linalg::symmetrize(&mut p);
        let q_now = a.transpose() * &p + &p * a;
        let (max_eig, _) = linalg::min_symmetric_eig(&(-&q_now));
        residual = (-max_eig).max(0.0);
        let (pmin, _) = linalg::min_symmetric_eig(&p);
        if residual <= 1e-10 && pmin >= EPS_PD * 0.999 {
            return Ok(LmiOutcome::Feasible(p));
        }
    }
    Ok(LmiOutcome::Undecided { residual })
}

#[derive(Debug, Clone)]
pub struct EqualitySolutions {
    /// Basis of the symmetric solution space of `A^T P + P A = 0`.
    pub basis: Vec<DMatrix<f64>>,
    /// A positive-definite element of that space, when the ascent finds one.
    pub spd: Option<DMatrix<f64>>,
}

/// Nullspace of the symmetric-restricted Lyapunov map, plus a search for a
/// positive-definite element by projected subgradient ascent of the minimum
/// eigenvalue over the coefficient ball.
pub fn lyapunov_equality_solutions(a: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> Result<EqualitySolutions> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::precondition("lyapunov_equality_solutions: A must be square"));
    }
    let k_mat = lyapunov_map_matrix(a);
    let svd = k_mat.clone().svd(false, true);
    let tol = 1e-10 * svd.singular_values.max().max(1e-300);
    let v_t = svd.v_t.as_ref().unwrap();
    let mut basis = Vec::new();
    let m = vech_len(n);
    for i in 0..svd.singular_values.len() {
        if svd.singular_values[i] <= tol {
            basis.push(unvech(n, &v_t.row(i).transpose()));
        }
    }
    // Rows of V^T beyond the stored singular values span the rest of the
    // kernel when K is rank deficient by shape.
    for i in svd.singular_values.len()..m.min(v_t.nrows()) {
        basis.push(unvech(n, &v_t.row(i).transpose()));
    }
    if basis.is_empty() {
        return Ok(EqualitySolutions { basis, spd: None });
    }
    // Maximize lambda_min(sum c_k S_k) over |c| <= 1 (concave).
    let dim = basis.len();
    let assemble = |c: &DVector<f64>| -> DMatrix<f64> {
        let mut p = DMatrix::zeros(n, n);
        for (k, s) in basis.iter().enumerate() {
            p += s * c[k];
        }
        p
    };
    let mut best: Option<(f64, DMatrix<f64>)> = None;
    for _ in 0..8 {
        let mut c = normal_vector(rng, dim);
        c /= c.norm().max(1e-300);
        let mut step = 0.5;
        for _ in 0..200 {
            let p = assemble(&c);
            let eig = p.clone().symmetric_eigen();
            let mut kmin = 0;
            for i in 1..n {
                if eig.eigenvalues[i] < eig.eigenvalues[kmin] {
                    kmin = i;
                }
            }
            let v = eig.eigenvectors.column(kmin);
            // Subgradient of lambda_min with respect to the coefficients.
            let g = DVector::from_fn(dim, |k, _| (basis[k].clone() * v).dot(&v));
            c += g * step;
            let nc = c.norm();
            if nc > 1.0 {
                c /= nc;
            }
            step *= 0.99;
        }
        let p = assemble(&c);
        let (lmin, _) = linalg::min_symmetric_eig(&p);
        if best.as_ref().map(|(b, _)| lmin > *b).unwrap_or(true) {
            best = Some((lmin, p));
        }
    }
    let spd = best.and_then(|(lmin, p)| {
        let scale = p.amax().max(1e-300);
        if lmin > 1e-8 * scale {
            Some(&p / scale)
        } else {
            None
        }
    });
    Ok(EqualitySolutions { basis, spd })
}

/// Iterated commutators `ad_A^k(B)`: `matrices[0] = B`,
/// `matrices[i+1] = A matrices[i] - matrices[i] A`.
#[derive(Debug, Clone)]
pub struct BracketChain {
    pub depth: usize,
    pub matrices: Vec<DMatrix<f64>>,
}

impl BracketChain {
    pub fn new(a: &DMatrix<f64>, b: &DMatrix<f64>, depth: usize) -> Self {
        let mut matrices = vec![b.clone()];
        for k in 0..depth {
            let last = &matrices[k];
            matrices.push(a * last - last * a);
        }
        BracketChain { depth, matrices }
    }
}

/// Rank condition `span{A y, ad^0 y, ..., ad^k y} = R^n`, tested by
/// column-pivoted QR with a threshold scaled to the largest column norm.
pub fn bracket_rank_condition(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    y: &DVector<f64>,
    k_max: usize,
) -> (bool, usize) {
    let n = a.nrows();
    let rank_of = |cols: &[DVector<f64>]| -> usize {
        let mut m = DMatrix::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            m.set_column(j, c);
        }
        let scale = cols.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0;
        }
        let qr = m.col_piv_qr();
        let r = qr.r();
        let mut rank = 0;
        for i in 0..r.nrows().min(r.ncols()) {
            if r[(i, i)].abs() > 1e-10 * scale {
                rank += 1;
            }
        }
        rank
    };
    let mut cols = vec![a * y];
    let mut bracket = b.clone();
    for k in 0..=k_max {
        cols.push(&bracket * y);
        if rank_of(&cols) == n {
            return (true, k);
        }
        bracket = a * &bracket - &bracket * a;
    }
    (false, k_max)
}

#[derive(Debug, Clone, Serialize)]
pub struct TemporalReport {
    pub holds: bool,
    /// Minimum over sampled unit states of the squared-coupling integral.
    pub min_sampled: f64,
    /// Minimum found by sphere descent.
    pub min_optimized: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Vec<f64>>,
}

/// Sampled test of the temporal condition
/// `<B e^{tA} y, e^{tA} y> = 0 for all t >= 0  =>  y = 0`:
/// evaluates `int <B e^{tA} y, e^{tA} y>^2 dt` on random unit states and
/// minimizes it over the sphere; a near-zero minimizer is a counterexample.
pub fn temporal_condition_sampled(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    t_horizon: f64,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<TemporalReport> {
    if samples == 0 {
        return Err(Error::precondition("temporal_condition_sampled: samples >= 1"));
    }
    let n = a.nrows();
    let evaluator = SemigroupEvaluator::new(Generator::Dense(a.clone()));
    let nodes = 128;
    let (ts, ws) = linalg::gauss_legendre(nodes, 0.0, t_horizon);
    let mut forms = Vec::with_capacity(nodes);
    for t in &ts {
        let s = evaluator.matrix(*t)?;
        let mut q = s.transpose() * b * &s;
        q = 0.5 * (&q + q.transpose());
        forms.push(q);
    }
    let integral = |y: &DVector<f64>| -> f64 {
        forms
            .iter()
            .zip(&ws)
            .map(|(q, w)| {
                let c = (q * y).dot(y);
                w * c * c
            })
            .sum()
    };
    let gradient = |y: &DVector<f64>| -> DVector<f64> {
        let mut g = DVector::zeros(n);
        for (q, w) in forms.iter().zip(&ws) {
            let qy = q * y;
            let c = qy.dot(y);
            g += qy * (4.0 * w * c);
        }
        g
    };
    let mut min_sampled = f64::INFINITY;
    for _ in 0..samples {
        let y = normal_vector(rng, n);
        let nrm = y.norm();
        if nrm == 0.0 {
            continue;
        }
        min_sampled = min_sampled.min(integral(&(y / nrm)));
    }
    let ip = InnerProduct::Identity;
    let problem = SphereProblem {
        dim: n,
        ip: &ip,
        value: &integral,
        gradient: Some(&gradient),
    };
    let minimum = minimize_on_sphere(&problem, 16, &[], rng, 300);
    let holds = min_sampled > 1e-14 && minimum.value >= 1e-12;
    let counterexample = if minimum.value < 1e-12 {
        Some(minimum.point.as_slice().to_vec())
    } else {
        None
    };
    Ok(TemporalReport {
        holds,
        min_sampled,
        min_optimized: minimum.value,
        counterexample,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignClass {
    Nonneg,
    Nonpos,
    Indefinite,
}

/// Classifies the symmetric part of `P B` by its eigenvalue signs.
pub fn pb_sign_check(p: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<SignClass> {
    let (pmin, _) = linalg::min_symmetric_eig(p);
    if pmin <= 0.0 {
        return Err(Error::precondition("pb_sign_check: P must be positive definite"));
    }
    let mut sym = p * b;
    sym = 0.5 * (&sym + sym.transpose());
    let eig = sym.symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    let tol = 1e-10 * scale;
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    Ok(if min >= -tol {
        SignClass::Nonneg
    } else if max <= tol {
        SignClass::Nonpos
    } else {
        SignClass::Indefinite
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub temporal_holds: bool,
    /// Estimated absolute-variant bound per grid horizon.
    pub deltas: Vec<(f64, f64)>,
    pub consistent: bool,
    pub finding: String,
}

/// Cross-checks the temporal condition against the sampled absolute-variant
/// bound over a horizon grid (the two are equivalent in finite dimension).
/// Inconsistencies are reported as findings, not errors: both sides are
/// sampled methods.
pub fn bal_coer_equivalence_test(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    t_grid: &[f64],
    rng: &mut ChaCha8Rng,
    cfg: &Config,
) -> Result<EquivalenceReport> {
    if t_grid.is_empty() {
        return Err(Error::precondition("bal_coer_equivalence_test: empty horizon grid"));
    }
    let t_max = t_grid.iter().cloned().fold(f64::MIN, f64::max);
    let temporal = temporal_condition_sampled(a, b, t_max, 64, rng)?;
    let n = a.nrows();
    let model = SystemModel {
        name: "equivalence-check".into(),
        generator: Generator::Dense(a.clone()),
        control: ControlOp::Linear(LinearOp::Dense(b.clone())),
        inner: InnerProduct::Identity,
        semigroup_class: SemigroupClass::Unknown,
        dimension: Dimension::Finite(n),
        lipschitz: None,
    };
    let mut deltas = Vec::new();
    for t in t_grid {
        let cert = certify::estimate_nonquadratic(&model, *t, Variant::Absolute, cfg.multistart, rng, cfg)?;
        deltas.push((*t, cert.delta));
    }
    let some_positive = deltas.iter().any(|(_, d)| *d > 1e-8);
    let (consistent, finding) = if temporal.holds {
        if some_positive {
            (true, "temporal condition holds and a positive absolute bound was found".into())
        } else {
            (
                false,
                "temporal condition holds but every sampled absolute bound is zero".into(),
            )
        }
    } else {
        // The counterexample direction must kill the absolute functional at
        // every horizon.
        match temporal
            .counterexample
            .as_ref()
            .map(|w| DVector::from_vec(w.clone()))
        {
            Some(witness) => {
                let mut max_val: f64 = 0.0;
                for t in t_grid {
                    let v = certify::functional_value(&model, *t, Variant::Absolute, &witness, cfg)?;
                    max_val = max_val.max(v);
                }
                if max_val < 1e-10 {
                    (true, "counterexample direction kills the absolute functional".into())
                } else {
                    (
                        false,
                        format!("counterexample direction leaves functional {max_val:.3e}"),
                    )
                }
            }
            None => (
                false,
                "temporal condition failed without an explicit counterexample".into(),
            ),
        }
    };
    Ok(EquivalenceReport {
        temporal_holds: temporal.holds,
        deltas,
        consistent,
        finding,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use approx::assert_relative_eq;

    #[test]
    fn lmi_negative_identity_feasible() {
        let out = lyapunov_lmi_feasible(&(-DMatrix::identity(2, 2))).unwrap();
        let p = out.matrix().expect("feasible").clone();
        let q = -&p * 2.0; // A^T P + P A = -2P
        let (qmax, _) = linalg::min_symmetric_eig(&(-q));
        assert!(qmax >= 0.0);
    }

    #[test]
    fn lmi_skew_feasible_with_zero_residual() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let out = lyapunov_lmi_feasible(&a).unwrap();
        let p = out.matrix().expect("skew systems admit P = I").clone();
        let q = a.transpose() * &p + &p * &a;
        assert!(q.amax() <= 1e-8, "residual {}", q.amax());
    }

    #[test]
    fn lmi_jordan_block_not_feasible() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        match lyapunov_lmi_feasible(&a).unwrap() {
            LmiOutcome::Infeasible { .. } => {}
            LmiOutcome::Undecided { .. } => {}
            LmiOutcome::Feasible(p) => panic!("Jordan block accepted with P = {p}"),
        }
    }

    #[test]
    fn equality_solutions_skew_contains_identity() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, -2.0, 0.0]);
        let sols = lyapunov_equality_solutions(&a, &mut seeded(3)).unwrap();
        let p = sols.spd.expect("skew systems have P = I");
        // Verify by explicit multiplication (Kronecker nullspace oracle).
        let q = a.transpose() * &p + &p * &a;
        assert!(q.amax() <= 1e-9 * p.amax());
        // diag(1,1) direction: P is a positive multiple of the identity here.
        assert_relative_eq!(p[(0, 0)], p[(1, 1)], max_relative = 1e-8);
        assert!(p[(0, 1)].abs() <= 1e-8 * p[(0, 0)].abs());
    }

    #[test]
    fn equality_solutions_stable_node_empty() {
        let sols = lyapunov_equality_solutions(&(-DMatrix::identity(3, 3)), &mut seeded(4)).unwrap();
        assert!(sols.basis.is_empty());
        assert!(sols.spd.is_none());
    }

    #[test]
    fn bracket_chain_integer_exact() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let chain = BracketChain::new(&a, &b, 3);
        for k in 0..3 {
            let direct = &a * &chain.matrices[k] - &chain.matrices[k] * &a;
            assert_eq!(direct, chain.matrices[k + 1]);
        }
        // ad^1 = AB - BA = [[0,-1],[0,0]] - [[0,1],[0,0]] = [[0,-2],[0,0]].
        assert_eq!(chain.matrices[1][(0, 1)], -2.0);
    }

    #[test]
    fn rank_condition_scalar_identity() {
        let a = DMatrix::zeros(1, 1);
        let b = DMatrix::identity(1, 1);
        let (holds, k) = bracket_rank_condition(&a, &b, &DVector::from_vec(vec![2.0]), 4);
        assert!(holds);
        assert_eq!(k, 0);
    }

    #[test]
    fn rank_condition_jordan_indefinite_pair() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let y = DVector::from_vec(vec![1.0, 0.0]);
        // Columns {Ay, By, [A,B]y, ...}: Ay = 0, By = (1,0), ad^1 y = (0,0)?
        // ad^1 = [[0,-2],[0,0]], ad^1 y = 0; ad^2 = [[0,0],[0,0]]... so the
        // span needs y with a second component; this y relies on deeper
        // columns. Verify against the direct bracket computation.
        let chain = BracketChain::new(&a, &b, 4);
        let mut spanned = vec![&a * &y];
        for m in &chain.matrices {
            spanned.push(m * &y);
        }
        let mut any_full = false;
        for k in 0..=4usize {
            let mut cols = DMatrix::zeros(2, k + 2);
            for (j, c) in spanned.iter().take(k + 2).enumerate() {
                cols.set_column(j, c);
            }
            if cols.rank(1e-12) == 2 {
                any_full = true;
                break;
            }
        }
        let (holds, _) = bracket_rank_condition(&a, &b, &y, 4);
        assert_eq!(holds, any_full);
    }

    #[test]
    fn rank_condition_rotation_pair_spans_plane() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let y = DVector::from_vec(vec![1.0, 0.0]);
        let (holds, _) = bracket_rank_condition(&a, &b, &y, 8);
        assert!(holds, "rotation generator plus indefinite B spans the plane");
    }

    #[test]
    fn temporal_identity_pair_holds() {
        let report = temporal_condition_sampled(
            &DMatrix::zeros(2, 2),
            &DMatrix::identity(2, 2),
            2.0,
            32,
            &mut seeded(5),
        )
        .unwrap();
        assert!(report.holds);
        assert!(report.counterexample.is_none());
    }

    #[test]
    fn temporal_rotation_operator_fails_everywhere() {
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let report =
            temporal_condition_sampled(&DMatrix::zeros(2, 2), &b, 2.0, 32, &mut seeded(6)).unwrap();
        assert!(!report.holds);
        assert!(report.counterexample.is_some());
    }

    #[test]
    fn temporal_vanishing_quadratic_form_direction_found() {
        // <B y, y> = (y1 + 2 y2)^2 vanishes along (2, -1)/sqrt(5).
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 4.0, 0.0, 4.0]);
        let report =
            temporal_condition_sampled(&DMatrix::zeros(2, 2), &b, 1.0, 32, &mut seeded(7)).unwrap();
        assert!(!report.holds);
        let w = DVector::from_vec(report.counterexample.expect("witness"));
        let dir = DVector::from_vec(vec![2.0, -1.0]) / 5.0f64.sqrt();
        let align = w.dot(&dir).abs();
        assert!(align > 1.0 - 1e-5, "witness misaligned: {align}");
    }

    #[test]
    fn pb_sign_examples() {
        let eye = DMatrix::identity(2, 2);
        assert_eq!(pb_sign_check(&eye, &eye).unwrap(), SignClass::Nonneg);
        let indef = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert_eq!(pb_sign_check(&eye, &indef).unwrap(), SignClass::Indefinite);
        // Symmetric part [[1,2],[2,4]] has eigenvalues {0, 5}.
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 4.0, 0.0, 4.0]);
        assert_eq!(pb_sign_check(&eye, &b).unwrap(), SignClass::Nonneg);
        let sym = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let eig = sym.symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_relative_eq!(vals[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(vals[1], 5.0, max_relative = 1e-12);
    }

    #[test]
    fn equivalence_identity_pair_consistent() {
        let report = bal_coer_equivalence_test(
            &DMatrix::zeros(2, 2),
            &DMatrix::identity(2, 2),
            &[1.0, 2.0],
            &mut seeded(8),
            &Config::default(),
        )
        .unwrap();
        assert!(report.temporal_holds);
        assert!(report.consistent);
    }

    #[test]
    fn equivalence_rotation_fails_both_sides() {
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let report = bal_coer_equivalence_test(
            &DMatrix::zeros(2, 2),
            &b,
            &[1.0, 2.0],
            &mut seeded(9),
            &Config::default(),
        )
        .unwrap();
        assert!(!report.temporal_holds);
        assert!(report.consistent, "{}", report.finding);
    }

    #[test]
    fn equivalence_skew_identity_deltas_grow_with_horizon() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.2, -1.0, 0.0, -0.4, -0.2, 0.4, 0.0]);
        let report = bal_coer_equivalence_test(
            &a,
            &DMatrix::identity(3, 3),
            &[1.0, 2.0, 4.0],
            &mut seeded(10),
            &Config::default(),
        )
        .unwrap();
        assert!(report.temporal_holds && report.consistent);
        // Identity B along an isometry group: delta(T) = T exactly.
        for (t, d) in &report.deltas {
            assert_relative_eq!(*d, *t, max_relative = 1e-5);
        }
    }
}
