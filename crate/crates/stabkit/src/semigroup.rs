//! Free-semigroup evaluation `S_0(t) y`: matrix exponentials for dense
//! generators, per-mode rotations for the modal wave, and the exact right
//! shift for the transport model.

use std::collections::HashMap;
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::operator::Generator;
use crate::{grid, modal};

pub use crate::grid::{shift_semigroup, ShiftResult};

/// `e^{tM}` by scaling-and-squaring with a Pade(13) core (Higham 2005).
pub fn matrix_exponential(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::precondition("matrix exponential needs a square matrix"));
    }
    if !t.is_finite() {
        return Err(Error::precondition("matrix exponential needs finite t"));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let a = m * t;
    // 1-norm (max column sum) drives the scaling choice.
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if norm1 > 700.0 {
        return Err(Error::ExpOverflow { scale: norm1 });
    }
    const THETA13: f64 = 5.371_920_351_148_152;
    let squarings = if norm1 > THETA13 {
        (norm1 / THETA13).log2().ceil() as u32
    } else {
        0
    };
    let a = a / 2f64.powi(squarings as i32);

    const B: [f64; 14] = [
        64_764_752_532_480_000.0,
        32_382_376_266_240_000.0,
        7_771_770_303_897_600.0,
        1_187_353_796_428_800.0,
        129_060_195_264_000.0,
        10_559_470_521_600.0,
        670_442_572_800.0,
        33_522_128_640.0,
        1_323_241_920.0,
        40_840_800.0,
        960_960.0,
        16_380.0,
        182.0,
        1.0,
    ];
    let eye = DMatrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (B[13] * &a6 + B[11] * &a4 + B[9] * &a2)
        + B[7] * &a6
        + B[5] * &a4
        + B[3] * &a2
        + B[1] * &eye;
    let u = &a * u_inner;
    let v = &a6 * (B[12] * &a6 + B[10] * &a4 + B[8] * &a2)
        + B[6] * &a6
        + B[4] * &a4
        + B[2] * &a2
        + B[0] * &eye;
    // Pade approximant: (V - U)^{-1} (V + U).
    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut result = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::precondition("Pade denominator is singular"))?;
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}

/// Exact modal wave evolution; conserves the energy norm to round-off.
pub fn wave_modal_semigroup(state: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    if state.len() % 2 != 0 || state.is_empty() {
        return Err(Error::precondition(
            "modal wave state needs an even, positive number of coordinates",
        ));
    }
    Ok(modal::evolve(state, t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    MatrixExponential,
    ModalRotation,
    ShiftHalfLine,
    Identity,
}

/// Evaluates `S_0(t) y` for one generator, memoizing dense exponentials by
/// time so concurrent certification sweeps can share the evaluator.
#[derive(Debug)]
pub struct SemigroupEvaluator {
    generator: Generator,
    cache: Mutex<HashMap<u64, DMatrix<f64>>>,
}

impl SemigroupEvaluator {
    pub fn new(generator: Generator) -> Self {
        SemigroupEvaluator {
            generator,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn mode(&self) -> EvalMode {
        match self.generator {
            Generator::Zero { .. } => EvalMode::Identity,
            Generator::Dense(_) => EvalMode::MatrixExponential,
            Generator::ModalWave { .. } => EvalMode::ModalRotation,
            Generator::Shift { .. } => EvalMode::ShiftHalfLine,
        }
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    /// `S_0(t) y`; the shift branch requires `t >= 0`.
    pub fn eval(&self, t: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        match &self.generator {
            Generator::Zero { .. } => Ok(y.clone()),
            Generator::Dense(_) => Ok(&self.matrix(t)? * y),
            Generator::ModalWave { .. } => Ok(modal::evolve(y, t)),
            Generator::Shift { grid } => {
                if t < 0.0 {
                    return Err(Error::precondition(
                        "the shift semigroup is only defined for t >= 0",
                    ));
                }
                Ok(grid::shift_semigroup(grid, y, t).values)
            }
        }
    }

    /// Matrix of `S_0(t)` for bounded generators.
    pub fn matrix(&self, t: f64) -> Result<DMatrix<f64>> {
        match &self.generator {
            Generator::Zero { dim } => Ok(DMatrix::identity(*dim, *dim)),
            Generator::ModalWave { modes } => Ok(modal::semigroup_matrix(*modes, t)),
            Generator::Shift { .. } => Err(Error::UnsupportedVariant(
                "the shift semigroup has no finite matrix representation".into(),
            )),
            Generator::Dense(m) => {
                let key = t.to_bits();
                if let Some(hit) = self.cache.lock().unwrap().get(&key) {
                    return Ok(hit.clone());
                }
                let e = matrix_exponential(m, t)?;
                self.cache.lock().unwrap().insert(key, e.clone());
                Ok(e)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal_vector, seeded};
    use approx::assert_relative_eq;

    /// Taylor-series oracle with binary argument reduction: independent of
    /// the Pade path.
    fn expm_taylor(m: &DMatrix<f64>, t: f64, terms: usize) -> DMatrix<f64> {
        let n = m.nrows();
        let a = m * t;
        let norm = a.amax();
        let k = if norm > 0.5 {
            (norm / 0.5).log2().ceil() as i32
        } else {
            0
        };
        let a = a / 2f64.powi(k);
        let mut sum = DMatrix::identity(n, n);
        let mut term = DMatrix::identity(n, n);
        for j in 1..=terms {
            term = &term * &a / j as f64;
            sum += &term;
        }
        for _ in 0..k {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn zero_matrix_gives_identity() {
        let e = matrix_exponential(&DMatrix::zeros(3, 3), 2.5).unwrap();
        assert_relative_eq!((e - DMatrix::identity(3, 3)).amax(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn nilpotent_jordan_block_closed_form() {
        // exp(t [[0,1],[0,0]]) = [[1,t],[0,1]]
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        for t in [0.3, 1.0, 7.0] {
            let e = matrix_exponential(&m, t).unwrap();
            assert_relative_eq!(e[(0, 0)], 1.0, epsilon = 1e-14);
            assert_relative_eq!(e[(0, 1)], t, epsilon = 1e-13);
            assert_relative_eq!(e[(1, 0)], 0.0, epsilon = 1e-14);
            assert_relative_eq!(e[(1, 1)], 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn matches_taylor_oracle_on_random_matrix() {
        let mut rng = seeded(17);
        let m = DMatrix::from_fn(4, 4, |_, _| {
            use rand::Rng;
            rng.gen_range(-1.0..1.0)
        });
        let e = matrix_exponential(&m, 0.7).unwrap();
        let oracle = expm_taylor(&m, 0.7, 60);
        let rel = (e.clone() - &oracle).amax() / oracle.amax();
        assert!(rel <= 1e-9, "relative deviation {rel:.2e}");
    }

    #[test]
    fn action_relative_error_small() {
        let mut rng = seeded(8);
        let m = DMatrix::from_fn(5, 5, |_, _| {
            use rand::Rng;
            rng.gen_range(-2.0..2.0)
        });
        let e = matrix_exponential(&m, 0.31).unwrap();
        let oracle = expm_taylor(&m, 0.31, 80);
        for _ in 0..10 {
            let x = normal_vector(&mut rng, 5);
            let lhs = &e * &x;
            let rhs = &oracle * &x;
            assert!((&lhs - &rhs).norm() <= 1e-10 * rhs.norm().max(1.0));
        }
    }

    #[test]
    fn exp_overflow_reported() {
        let m = DMatrix::from_diagonal_element(2, 2, 1.0);
        match matrix_exponential(&m, 1e4) {
            Err(Error::ExpOverflow { .. }) => {}
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn semigroup_property_on_dense_generator() {
        let m = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.5, 0.0, -0.5, -0.1]);
        let ev = SemigroupEvaluator::new(Generator::Dense(m));
        let mut rng = seeded(4);
        let y = normal_vector(&mut rng, 3);
        // 5 x 5 grid of (t, s) pairs.
        for i in 1..=5 {
            for j in 1..=5 {
                let (t, s) = (0.2 * i as f64, 0.17 * j as f64);
                let once = ev.eval(t + s, &y).unwrap();
                let twice = ev.eval(t, &ev.eval(s, &y).unwrap()).unwrap();
                assert!((once - twice).norm() <= 1e-8 * y.norm());
            }
        }
    }

    #[test]
    fn evaluator_identity_at_zero() {
        let ev = SemigroupEvaluator::new(Generator::ModalWave { modes: 4 });
        let y = DVector::from_fn(8, |i, _| i as f64 - 3.0);
        assert_eq!(ev.eval(0.0, &y).unwrap(), y);
    }

    #[test]
    fn wave_modal_energy_conserved() {
        let mut rng = seeded(12);
        let y = normal_vector(&mut rng, 16);
        let out = wave_modal_semigroup(&y, 0.37).unwrap();
        assert_relative_eq!(
            out.norm_squared(),
            y.norm_squared(),
            max_relative = 1e-12
        );
    }
}
