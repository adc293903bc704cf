//! Modal truncation of the 1-D wave equation on `(0, 1)` with Dirichlet
//! boundary, in energy coordinates.
//!
//! The Dirichlet Laplacian eigenpairs are `phi_j(x) = sqrt(2) sin(j pi x)`,
//! `lambda_j = (j pi)^2`. A wave state `(y, y_t)` with `y = sum a_j phi_j`
//! and `y_t = sum sqrt(lambda_j) b_j phi_j` is stored as
//! `[u_1..u_N, w_1..w_N]` with `u_j = sqrt(lambda_j) a_j`, `w_j =
//! sqrt(lambda_j) b_j`, so the H^1_0 x L^2 energy norm is the Euclidean
//! norm of the coefficients and the free semigroup is a per-mode rotation.

use nalgebra::{DMatrix, DVector};

/// Angular frequency of mode `j` (1-based): `omega_j = j pi`.
pub fn omega(j: usize) -> f64 {
    j as f64 * std::f64::consts::PI
}

/// Splits an energy-coordinate state into (displacement, velocity) halves.
pub fn split(state: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let n = state.len() / 2;
    (
        state.rows(0, n).into_owned(),
        state.rows(n, n).into_owned(),
    )
}

pub fn join(u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    let n = u.len();
    DVector::from_fn(2 * n, |i, _| if i < n { u[i] } else { w[i - n] })
}

/// Exact free evolution: per-mode rotation by `omega_j t`.
pub fn evolve(state: &DVector<f64>, t: f64) -> DVector<f64> {
    let n = state.len() / 2;
    let mut out = DVector::zeros(2 * n);
    for j in 0..n {
        let (c, s) = {
            let th = omega(j + 1) * t;
            (th.cos(), th.sin())
        };
        let u = state[j];
        let w = state[n + j];
        out[j] = c * u + s * w;
        out[n + j] = -s * u + c * w;
    }
    out
}

/// Energy of a modal pair: the squared Euclidean norm of the coordinates.
pub fn energy(state: &DVector<f64>) -> f64 {
    state.norm_squared()
}

/// Generator matrix in energy coordinates: block rotation rates.
pub fn generator_matrix(modes: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(2 * modes, 2 * modes);
    for j in 0..modes {
        a[(j, modes + j)] = omega(j + 1);
        a[(modes + j, j)] = -omega(j + 1);
    }
    a
}

/// Free-semigroup matrix at time `t` (block-diagonal rotations).
pub fn semigroup_matrix(modes: usize, t: f64) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(2 * modes, 2 * modes);
    for j in 0..modes {
        let th = omega(j + 1) * t;
        let (c, sn) = (th.cos(), th.sin());
        s[(j, j)] = c;
        s[(j, modes + j)] = sn;
        s[(modes + j, j)] = -sn;
        s[(modes + j, modes + j)] = c;
    }
    s
}

/// Restriction Gram matrix `E_jk = integral over (a,b) of phi_j phi_k`
/// in closed form.
pub fn restriction_gram(modes: usize, a: f64, b: f64) -> DMatrix<f64> {
    assert!(0.0 <= a && a < b && b <= 1.0);
    let pi = std::f64::consts::PI;
    let prim = |m: f64, x: f64| -> f64 {
        // integral of cos(m pi x) dx
        if m == 0.0 {
            x
        } else {
            (m * pi * x).sin() / (m * pi)
        }
    };
    DMatrix::from_fn(modes, modes, |j, k| {
        let (jj, kk) = ((j + 1) as f64, (k + 1) as f64);
        // 2 sin(j pi x) sin(k pi x) = cos((j-k) pi x) - cos((j+k) pi x)
        (prim(jj - kk, b) - prim(jj - kk, a)) - (prim(jj + kk, b) - prim(jj + kk, a))
    })
}

/// Pointwise sampling helpers for nonlinear dampings: synthesize the L^2
/// function from modal coefficients on a Simpson grid and project back.
#[derive(Debug, Clone)]
pub struct PointwiseSampler {
    pub modes: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// basis[q][j] = phi_{j+1}(x_q)
    basis: Vec<Vec<f64>>,
}

impl PointwiseSampler {
    pub fn new(modes: usize, panels: usize) -> Self {
        let m = 2 * panels; // Simpson needs an even interval count
        let hx = 1.0 / m as f64;
        let mut nodes = Vec::with_capacity(m + 1);
        let mut weights = Vec::with_capacity(m + 1);
        for q in 0..=m {
            nodes.push(q as f64 * hx);
            let w = if q == 0 || q == m {
                1.0
            } else if q % 2 == 1 {
                4.0
            } else {
                2.0
            };
            weights.push(w * hx / 3.0);
        }
        let basis = nodes
            .iter()
            .map(|x| {
                (1..=modes)
                    .map(|j| std::f64::consts::SQRT_2 * (omega(j) * x).sin())
                    .collect()
            })
            .collect();
        PointwiseSampler {
            modes,
            nodes,
            weights,
            basis,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Values of `sum_j c_j phi_j` at the sampler nodes.
    pub fn synthesize(&self, coeffs: &DVector<f64>) -> Vec<f64> {
        self.basis
            .iter()
            .map(|row| row.iter().zip(coeffs.iter()).map(|(p, c)| p * c).sum())
            .collect()
    }

    /// Modal coefficients `<f, phi_j>` of sampled values.
    pub fn project(&self, values: &[f64]) -> DVector<f64> {
        DVector::from_fn(self.modes, |j, _| {
            values
                .iter()
                .zip(&self.weights)
                .zip(&self.basis)
                .map(|((v, w), row)| v * w * row[j])
                .sum()
        })
    }
}
