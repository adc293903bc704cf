//! States, inner products, and the operators `A` and `B` of the system
//! `ż = Az + v(t)Bz`, in the representations the rest of the toolkit
//! consumes uniformly.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Grid, StepFunction};
use crate::linalg::TridiagSym;
use crate::rng::normal_vector;
use crate::{grid, modal};

/// Identifies the representation basis of a state vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisTag {
    Euclidean,
    /// Wave energy coordinates, `2 * modes` entries.
    Modal {
        modes: usize,
    },
    /// Nodal values of a piecewise-linear interpolant.
    Grid(Grid),
}

/// A state: finite list of real coefficients plus its basis tag.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub coords: DVector<f64>,
    pub basis: BasisTag,
}

impl StateVector {
    pub fn new(coords: DVector<f64>, basis: BasisTag) -> Result<Self> {
        if !coords.iter().all(|c| c.is_finite()) {
            return Err(Error::precondition("state coordinates must be finite"));
        }
        Ok(StateVector { coords, basis })
    }

    pub fn euclidean(coords: Vec<f64>) -> Self {
        StateVector {
            coords: DVector::from_vec(coords),
            basis: BasisTag::Euclidean,
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// Inner product of the state space: identity, a dense SPD weight, or the
/// tridiagonal mass form of a grid basis.
#[derive(Debug, Clone)]
pub enum InnerProduct {
    Identity,
    Dense(DMatrix<f64>),
    Tridiag(TridiagSym),
}

impl InnerProduct {
    /// Validates symmetry (relative 1e-12) and positive definiteness.
    pub fn dense(weight: DMatrix<f64>) -> Result<Self> {
        let mut w = weight;
        let asym = crate::linalg::symmetrize(&mut w);
        if asym > 1e-12 {
            return Err(Error::precondition(format!(
                "inner-product weight is not symmetric (relative asymmetry {asym:.2e})"
            )));
        }
        let eig = w.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&e| e <= 0.0) {
            return Err(Error::precondition(
                "inner-product weight has a non-positive eigenvalue",
            ));
        }
        Ok(InnerProduct::Dense(w))
    }

    pub fn dim_ok(&self, n: usize) -> bool {
        match self {
            InnerProduct::Identity => true,
            InnerProduct::Dense(p) => p.nrows() == n,
            InnerProduct::Tridiag(m) => m.len() == n,
        }
    }

    pub fn dot(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        match self {
            InnerProduct::Identity => x.dot(y),
            InnerProduct::Dense(p) => (p * x).dot(y),
            InnerProduct::Tridiag(m) => m.mul_vec(x).dot(y),
        }
    }

    pub fn norm(&self, x: &DVector<f64>) -> f64 {
        self.dot(x, x).max(0.0).sqrt()
    }

    /// Apply the weight: `x -> P x`.
    pub fn apply_weight(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            InnerProduct::Identity => x.clone(),
            InnerProduct::Dense(p) => p * x,
            InnerProduct::Tridiag(m) => m.mul_vec(x),
        }
    }

    pub fn weight_dense(&self, n: usize) -> DMatrix<f64> {
        match self {
            InnerProduct::Identity => DMatrix::identity(n, n),
            InnerProduct::Dense(p) => p.clone(),
            InnerProduct::Tridiag(m) => m.to_dense(),
        }
    }
}

/// `<P x, y>` with pre-checks on basis and dimensions.
pub fn inner_product(x: &StateVector, y: &StateVector, ip: &InnerProduct) -> Result<f64> {
    if x.basis != y.basis {
        return Err(Error::precondition(format!(
            "states use different bases: {:?} vs {:?}",
            x.basis, y.basis
        )));
    }
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            context: "inner_product states".into(),
            left: x.dim(),
            right: y.dim(),
        });
    }
    if !ip.dim_ok(x.dim()) {
        let wdim = match ip {
            InnerProduct::Identity => x.dim(),
            InnerProduct::Dense(p) => p.nrows(),
            InnerProduct::Tridiag(m) => m.len(),
        };
        return Err(Error::DimensionMismatch {
            context: "inner_product weight".into(),
            left: x.dim(),
            right: wdim,
        });
    }
    Ok(ip.dot(&x.coords, &y.coords))
}

/// Bounded linear operators in the representations used by the gallery.
#[derive(Debug, Clone)]
pub enum LinearOp {
    Zero {
        dim: usize,
    },
    Identity {
        dim: usize,
    },
    Dense(DMatrix<f64>),
    Diagonal(DVector<f64>),
    /// Multiplication by a step profile on grid functions (nodal values).
    MultiplyProfile {
        grid: Grid,
        profile: StepFunction,
    },
    /// Finite-rank map `z -> sum_k coeff_k <z, dirs_k>_L2 dirs_k` on a grid.
    GridFiniteRank {
        grid: Grid,
        directions: Vec<DVector<f64>>,
        coefficients: Vec<f64>,
    },
    Sum(Box<LinearOp>, Box<LinearOp>),
}

impl LinearOp {
    pub fn dim(&self) -> usize {
        match self {
            LinearOp::Zero { dim } | LinearOp::Identity { dim } => *dim,
            LinearOp::Dense(m) => m.nrows(),
            LinearOp::Diagonal(d) => d.len(),
            LinearOp::MultiplyProfile { grid, .. } => grid.n,
            LinearOp::GridFiniteRank { grid, .. } => grid.n,
            LinearOp::Sum(a, _) => a.dim(),
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            LinearOp::Zero { dim } => DVector::zeros(*dim),
            LinearOp::Identity { .. } => x.clone(),
            LinearOp::Dense(m) => m * x,
            LinearOp::Diagonal(d) => x.component_mul(d),
            LinearOp::MultiplyProfile { grid, profile } => {
                DVector::from_fn(grid.n, |i, _| profile.eval(grid.node(i)) * x[i])
            }
            LinearOp::GridFiniteRank {
                grid,
                directions,
                coefficients,
            } => {
                let mut out = DVector::zeros(grid.n);
                for (dir, c) in directions.iter().zip(coefficients) {
                    out += dir * (c * grid.l2_dot(x, dir));
                }
                out
            }
            LinearOp::Sum(a, b) => a.apply(x) + b.apply(x),
        }
    }

    /// Dense matrix of the operator in the coordinate basis, when available.
    pub fn to_dense(&self) -> Option<DMatrix<f64>> {
        match self {
            LinearOp::Zero { dim } => Some(DMatrix::zeros(*dim, *dim)),
            LinearOp::Identity { dim } => Some(DMatrix::identity(*dim, *dim)),
            LinearOp::Dense(m) => Some(m.clone()),
            LinearOp::Diagonal(d) => Some(DMatrix::from_diagonal(d)),
            LinearOp::MultiplyProfile { .. } | LinearOp::GridFiniteRank { .. } => None,
            LinearOp::Sum(a, b) => Some(a.to_dense()? + b.to_dense()?),
        }
    }

    /// Upper bound on the operator norm (Euclidean; exact for the dense,
    /// diagonal and profile kinds, subadditive for sums).
    pub fn norm_bound(&self) -> f64 {
        match self {
            LinearOp::Zero { .. } => 0.0,
            LinearOp::Identity { .. } => 1.0,
            LinearOp::Dense(m) => m.clone().svd(false, false).singular_values[0],
            LinearOp::Diagonal(d) => d.amax(),
            LinearOp::MultiplyProfile { profile, .. } => profile.sup_abs(),
            LinearOp::GridFiniteRank {
                grid,
                directions,
                coefficients,
            } => directions
                .iter()
                .zip(coefficients)
                .map(|(d, c)| c.abs() * grid.l2_dot(d, d))
                .sum(),
            LinearOp::Sum(a, b) => a.norm_bound() + b.norm_bound(),
        }
    }

    /// Adjoint with respect to a dense-representable inner product:
    /// `M' = P^{-1} M^T P`. Only available when the operator has a matrix.
    pub fn adjoint(&self, ip: &InnerProduct) -> Result<LinearOp> {
        let m = self.to_dense().ok_or_else(|| {
            Error::UnsupportedVariant("adjoint is only available for matrix-backed operators".into())
        })?;
        let n = m.nrows();
        let p = ip.weight_dense(n);
        let pm = &p * &m;
        let lu = p.lu();
        let sol = lu
            .solve(&pm.transpose())
            .ok_or_else(|| Error::precondition("inner-product weight is singular"))?;
        Ok(LinearOp::Dense(sol))
    }
}

/// A (possibly) nonlinear operator `B: H -> H` with `B(0) = 0` and declared
/// Lipschitz metadata.
#[derive(Clone)]
pub struct NonlinearOp {
    pub map: Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>,
    pub dim: usize,
    pub lipschitz_global: Option<f64>,
    pub lipschitz_on_ball: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    pub vanishes_at_zero: bool,
    pub positive: bool,
}

impl fmt::Debug for NonlinearOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearOp")
            .field("dim", &self.dim)
            .field("lipschitz_global", &self.lipschitz_global)
            .field("vanishes_at_zero", &self.vanishes_at_zero)
            .field("positive", &self.positive)
            .finish()
    }
}

impl NonlinearOp {
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.map)(x)
    }
}

/// The control operator, linear or nonlinear.
#[derive(Debug, Clone)]
pub enum ControlOp {
    Linear(LinearOp),
    Nonlinear(NonlinearOp),
}

impl ControlOp {
    pub fn dim(&self) -> usize {
        match self {
            ControlOp::Linear(l) => l.dim(),
            ControlOp::Nonlinear(n) => n.dim,
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            ControlOp::Linear(l) => l.apply(x),
            ControlOp::Nonlinear(n) => n.apply(x),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, ControlOp::Linear(_))
    }

    pub fn linear(&self) -> Option<&LinearOp> {
        match self {
            ControlOp::Linear(l) => Some(l),
            ControlOp::Nonlinear(_) => None,
        }
    }

    /// Declared or derived Lipschitz constant.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            ControlOp::Linear(l) => Some(l.norm_bound()),
            ControlOp::Nonlinear(n) => n.lipschitz_global,
        }
    }

    /// Whether `<B z, z> >= 0` is declared (nonlinear) or provable from the
    /// symmetric part (matrix-backed linear operators).
    pub fn positive(&self, ip: &InnerProduct) -> Option<bool> {
        match self {
            ControlOp::Nonlinear(n) => Some(n.positive),
            ControlOp::Linear(l) => {
                let m = l.to_dense()?;
                let n = m.nrows();
                let p = ip.weight_dense(n);
                let mut sym = &p * &m;
                sym = 0.5 * (&sym + sym.transpose());
                let eig = sym.symmetric_eigen();
                let scale = eig.eigenvalues.amax().max(1.0);
                Some(eig.eigenvalues.iter().all(|&e| e >= -1e-10 * scale))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemigroupClass {
    Contraction,
    Isometry,
    Unknown,
}

/// Dimension descriptor: plain finite, or an explicit modal truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Finite(usize),
    ModalTruncated(usize),
}

/// The generator `A` in one of the exactly evaluable forms.
#[derive(Debug, Clone)]
pub enum Generator {
    Zero { dim: usize },
    Dense(DMatrix<f64>),
    /// 1-D Dirichlet wave in energy coordinates, `2 * modes` variables.
    ModalWave { modes: usize },
    /// Right shift on the half line, represented on a truncated grid.
    Shift { grid: Grid },
}

impl Generator {
    pub fn dim(&self) -> usize {
        match self {
            Generator::Zero { dim } => *dim,
            Generator::Dense(m) => m.nrows(),
            Generator::ModalWave { modes } => 2 * modes,
            Generator::Shift { grid } => grid.n,
        }
    }

    /// Matrix action of `A`, when the generator is bounded in the
    /// representation (everything except the shift).
    pub fn apply(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            Generator::Zero { dim } => Some(DVector::zeros(*dim)),
            Generator::Dense(m) => Some(m * x),
            Generator::ModalWave { modes } => {
                let n = *modes;
                let mut out = DVector::zeros(2 * n);
                for j in 0..n {
                    out[j] = modal::omega(j + 1) * x[n + j];
                    out[n + j] = -modal::omega(j + 1) * x[j];
                }
                Some(out)
            }
            Generator::Shift { .. } => None,
        }
    }

    pub fn to_dense(&self) -> Option<DMatrix<f64>> {
        match self {
            Generator::Zero { dim } => Some(DMatrix::zeros(*dim, *dim)),
            Generator::Dense(m) => Some(m.clone()),
            Generator::ModalWave { modes } => Some(modal::generator_matrix(*modes)),
            Generator::Shift { .. } => None,
        }
    }
}

/// The full model `ż = Az + v(t) Bz` with its inner product and metadata.
#[derive(Debug, Clone)]
pub struct SystemModel {
    pub name: String,
    pub generator: Generator,
    pub control: ControlOp,
    pub inner: InnerProduct,
    pub semigroup_class: SemigroupClass,
    pub dimension: Dimension,
    /// Declared global Lipschitz constant of `B` (metadata; linear operators
    /// fall back to their norm bound).
    pub lipschitz: Option<f64>,
}

impl SystemModel {
    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    pub fn norm(&self, x: &DVector<f64>) -> f64 {
        self.inner.norm(x)
    }

    pub fn dot(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.inner.dot(x, y)
    }

    /// `<B z, z>_P`, the control coupling along which energy is pumped
    /// or drained.
    pub fn coupling(&self, z: &DVector<f64>) -> f64 {
        self.inner.dot(&self.control.apply(z), z)
    }

    pub fn lipschitz_bound(&self) -> Option<f64> {
        self.lipschitz.or_else(|| self.control.lipschitz())
    }

    pub fn basis(&self) -> BasisTag {
        match &self.generator {
            Generator::Zero { .. } | Generator::Dense(_) => BasisTag::Euclidean,
            Generator::ModalWave { modes } => BasisTag::Modal { modes: *modes },
            Generator::Shift { grid } => BasisTag::Grid(*grid),
        }
    }

    /// Sampled dissipativity rate `<A z, z>_P / |z|^2` maximized over random
    /// states; the shift generator uses the one-sided derivative of the exact
    /// semigroup norm instead of an unbounded matrix action.
    pub fn max_dissipation_rate(&self, rng: &mut ChaCha8Rng, samples: usize) -> f64 {
        let n = self.dim();
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..samples {
            let z = normal_vector(rng, n);
            let nz2 = self.dot(&z, &z);
            if nz2 <= 0.0 {
                continue;
            }
            let rate = match &self.generator {
                Generator::Shift { grid } => {
                    let h = 1e-6;
                    let shifted = grid::shift_semigroup(grid, &z, h).values;
                    (self.dot(&shifted, &shifted) - nz2) / (2.0 * h)
                }
                g => {
                    let az = g.apply(&z).expect("bounded generator");
                    self.dot(&az, &z)
                }
            };
            worst = worst.max(rate / nz2);
        }
        worst
    }

    /// Checks the declared semigroup class on random samples.
    pub fn check_semigroup_class(&self, rng: &mut ChaCha8Rng, samples: usize) -> bool {
        let n = self.dim();
        match self.semigroup_class {
            SemigroupClass::Unknown => true,
            SemigroupClass::Contraction => self.max_dissipation_rate(rng, samples) <= 1e-10,
            SemigroupClass::Isometry => {
                for _ in 0..samples {
                    let z = normal_vector(rng, n);
                    let nz2 = self.dot(&z, &z);
                    let rate = match &self.generator {
                        Generator::Shift { grid } => {
                            let h = 1e-6;
                            let s = grid::shift_semigroup(grid, &z, h).values;
                            (self.dot(&s, &s) - nz2) / (2.0 * h)
                        }
                        g => self.dot(&g.apply(&z).expect("bounded generator"), &z),
                    };
                    if rate.abs() > 1e-10 * nz2 {
                        return false;
                    }
                }
                true
            }
        }
    }
}

/// Sampled lower bound on the best Lipschitz constant of `op` over the ball
/// of the given radius: max difference quotient over random pairs, sharpened
/// by a local hill climb around the best pair found.
pub fn estimate_lipschitz(
    op: &NonlinearOp,
    radius: f64,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if radius <= 0.0 {
        return Err(Error::precondition("estimate_lipschitz: radius must be > 0"));
    }
    if samples < 2 {
        return Err(Error::precondition("estimate_lipschitz: need samples >= 2"));
    }
    let n = op.dim;
    let in_ball = |rng: &mut ChaCha8Rng| -> DVector<f64> {
        let dir = normal_vector(rng, n);
        let nd = dir.norm();
        if nd == 0.0 {
            return DVector::zeros(n);
        }
        let r: f64 = rng.gen_range(0.0f64..1.0);
        dir * (radius * r.powf(1.0 / n as f64) / nd)
    };
    let quotient = |x: &DVector<f64>, y: &DVector<f64>| -> Result<f64> {
        let dx = (x - y).norm();
        if dx < 1e-14 {
            return Ok(0.0);
        }
        let fx = op.apply(x);
        let fy = op.apply(y);
        if !fx.iter().all(|v| v.is_finite()) {
            return Err(Error::Evaluation {
                point: format!("{:?}", x.as_slice()),
                reason: "operator returned a non-finite value".into(),
            });
        }
        Ok((fx - fy).norm() / dx)
    };
    let mut best = 0.0f64;
    let mut best_pair = (DVector::zeros(n), DVector::zeros(n));
    for k in 0..samples {
        let x = in_ball(rng);
        // Mix far pairs, near pairs, and pairs through the origin.
        let y = match k % 3 {
            0 => in_ball(rng),
            1 => {
                let step = normal_vector(rng, n) * (1e-4 * radius);
                let cand = &x + step;
                let nc = cand.norm();
                if nc > radius {
                    cand * (radius / nc)
                } else {
                    cand
                }
            }
            _ => DVector::zeros(n),
        };
        let q = quotient(&x, &y)?;
        if q > best {
            best = q;
            best_pair = (x, y);
        }
    }
    // Local refinement: shrink random perturbations around the best pair.
    let mut scale = 0.25 * radius;
    for _ in 0..40 {
        let mut improved = false;
        for _ in 0..8 {
            let px = &best_pair.0 + normal_vector(rng, n) * scale;
            let py = &best_pair.1 + normal_vector(rng, n) * scale;
            let clip = |v: DVector<f64>| {
                let nv = v.norm();
                if nv > radius {
                    v * (radius / nv)
                } else {
                    v
                }
            };
            let (px, py) = (clip(px), clip(py));
            let q = quotient(&px, &py)?;
            if q > best {
                best = q;
                best_pair = (px, py);
                improved = true;
            }
        }
        if !improved {
            scale *= 0.5;
            if scale < 1e-9 * radius {
                break;
            }
        }
    }
    if let Some(l) = op.lipschitz_global {
        debug_assert!(best <= l + 1e-9, "sampled constant exceeds declared bound");
    }
    Ok(best)
}

/// Wraps a linear operator as a `NonlinearOp` (used by the sampling checks).
pub fn linear_as_nonlinear(op: &LinearOp) -> NonlinearOp {
    let cloned = op.clone();
    let norm = op.norm_bound();
    NonlinearOp {
        dim: op.dim(),
        map: Arc::new(move |x| cloned.apply(x)),
        lipschitz_global: Some(norm),
        lipschitz_on_ball: None,
        vanishes_at_zero: true,
        positive: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use approx::assert_relative_eq;

    #[test]
    fn orthogonal_vectors_have_zero_product() {
        let x = StateVector::euclidean(vec![1.0, 0.0]);
        let y = StateVector::euclidean(vec![0.0, 1.0]);
        assert_eq!(inner_product(&x, &y, &InnerProduct::Identity).unwrap(), 0.0);
    }

    #[test]
    fn weighted_product_direct_evaluation() {
        let x = StateVector::euclidean(vec![1.0, 1.0]);
        let p = InnerProduct::dense(DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0])))
            .unwrap();
        assert_relative_eq!(inner_product(&x, &x, &p).unwrap(), 5.0);
    }

    #[test]
    fn dimension_mismatch_is_reported_with_both_sizes() {
        let x = StateVector::euclidean(vec![1.0, 0.0]);
        let y = StateVector::euclidean(vec![0.0, 1.0, 2.0]);
        match inner_product(&x, &y, &InnerProduct::Identity) {
            Err(Error::DimensionMismatch { left, right, .. }) => {
                assert_eq!((left, right), (2, 3));
            }
            other => panic!("expected dimension mismatch, got {other:?}"),
        }
    }

    #[test]
    fn asymmetric_weight_rejected() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.1, 1.0]);
        assert!(InnerProduct::dense(p).is_err());
    }

    #[test]
    fn symmetry_over_random_triples() {
        let mut rng = seeded(11);
        for _ in 0..100 {
            let x = StateVector::euclidean(normal_vector(&mut rng, 4).as_slice().to_vec());
            let y = StateVector::euclidean(normal_vector(&mut rng, 4).as_slice().to_vec());
            // Random SPD weight: G^T G + I.
            let g = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
            let p = InnerProduct::dense(g.transpose() * &g + DMatrix::identity(4, 4)).unwrap();
            let a = inner_product(&x, &y, &p).unwrap();
            let b = inner_product(&y, &x, &p).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn composite_sum_is_exact() {
        let a = LinearOp::Dense(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        let b = LinearOp::Diagonal(DVector::from_vec(vec![2.0, 3.0]));
        let sum = LinearOp::Sum(Box::new(a.clone()), Box::new(b.clone()));
        let mut rng = seeded(5);
        for _ in 0..20 {
            let x = normal_vector(&mut rng, 2);
            let lhs = sum.apply(&x);
            let rhs = a.apply(&x) + b.apply(&x);
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn linearity_of_apply_sampled() {
        let m = LinearOp::Dense(DMatrix::from_row_slice(3, 3, &[
            0.2, -1.0, 0.4, 0.0, 0.5, 1.1, -0.3, 0.0, 0.9,
        ]));
        let mut rng = seeded(9);
        for _ in 0..25 {
            let x = normal_vector(&mut rng, 3);
            let y = normal_vector(&mut rng, 3);
            let s: f64 = rng.gen_range(-3.0..3.0);
            let lhs = m.apply(&(&x + &y * s));
            let rhs = m.apply(&x) + m.apply(&y) * s;
            let slack = 1e-10 * (x.norm() + s.abs() * y.norm() + 1.0);
            assert!((lhs - rhs).norm() <= slack);
        }
    }

    #[test]
    fn adjoint_in_weighted_product() {
        let m = LinearOp::Dense(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, -1.0]));
        let p = InnerProduct::dense(DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])).unwrap();
        let adj = m.adjoint(&p).unwrap();
        let mut rng = seeded(21);
        for _ in 0..20 {
            let x = normal_vector(&mut rng, 2);
            let y = normal_vector(&mut rng, 2);
            let lhs = p.dot(&m.apply(&x), &y);
            let rhs = p.dot(&x, &adj.apply(&y));
            assert_relative_eq!(lhs, rhs, epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    #[test]
    fn lipschitz_identity_is_one() {
        let op = linear_as_nonlinear(&LinearOp::Identity { dim: 3 });
        let l = estimate_lipschitz(&op, 2.0, 200, &mut seeded(1)).unwrap();
        assert_relative_eq!(l, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn lipschitz_absolute_value_is_one() {
        let op = NonlinearOp {
            dim: 1,
            map: Arc::new(|x: &DVector<f64>| DVector::from_vec(vec![x[0].abs()])),
            lipschitz_global: Some(1.0),
            lipschitz_on_ball: None,
            vanishes_at_zero: true,
            positive: true,
        };
        let l = estimate_lipschitz(&op, 1.0, 500, &mut seeded(2)).unwrap();
        assert_relative_eq!(l, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn lipschitz_matches_largest_singular_value() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, 0.0, -0.2, 2.0, 0.3, 0.0, 0.1, 0.5]);
        let sigma_max = m.clone().svd(false, false).singular_values[0];
        let op = linear_as_nonlinear(&LinearOp::Dense(m));
        let l = estimate_lipschitz(&op, 1.0, 10_000, &mut seeded(3)).unwrap();
        assert_relative_eq!(l, sigma_max, epsilon = 1e-3);
        assert!(l <= sigma_max + 1e-9);
    }

    #[test]
    fn linear_positivity_detected() {
        let pos = ControlOp::Linear(LinearOp::Dense(DMatrix::from_row_slice(2, 2, &[
            1.0, 4.0, 0.0, 4.0,
        ])));
        assert_eq!(pos.positive(&InnerProduct::Identity), Some(true));
        let indef = ControlOp::Linear(LinearOp::Diagonal(DVector::from_vec(vec![1.0, -1.0])));
        assert_eq!(indef.positive(&InnerProduct::Identity), Some(false));
    }
}
