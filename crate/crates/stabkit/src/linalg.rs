//! Dense and tridiagonal linear-algebra helpers: Gauss-Legendre rules,
//! symmetric pencil eigensolvers, least-squares line fits.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[a, b]`.
///
/// Nodes are found by Newton iteration on the Legendre recurrence; this is
/// accurate to machine precision for the node counts used here (<= 4096).
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1 && b > a);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and derivative by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        weights[i] = w;
        nodes[n - 1 - i] = -x;
        weights[n - 1 - i] = w;
    }
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    for i in 0..n {
        nodes[i] = mid - half * nodes[i];
        weights[i] *= half;
    }
    (nodes, weights)
}

/// Force exact symmetry, returning the worst relative asymmetry found.
pub fn symmetrize(m: &mut DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let scale = m.amax().max(1e-300);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs() / scale);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    worst
}

/// Smallest eigenvalue and eigenvector of a symmetric matrix.
pub fn min_symmetric_eig(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = m.clone().symmetric_eigen();
    let mut k = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] < eig.eigenvalues[k] {
            k = i;
        }
    }
    (eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned())
}

/// Smallest eigenvalue/eigenvector of the symmetric pencil `W x = mu P x`
/// with `P` symmetric positive definite, via the Cholesky reduction
/// `L^{-1} W L^{-T}`.
pub fn pencil_min_eigen(w: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let chol = p
        .clone()
        .cholesky()
        .ok_or_else(|| Error::precondition("inner-product weight is not positive definite"))?;
    let l = chol.l();
    // C = L^{-1} W L^{-T}
    let mut c = w.clone();
    l.solve_lower_triangular_mut(&mut c);
    c.transpose_mut();
    l.solve_lower_triangular_mut(&mut c);
    symmetrize(&mut c);
    let (mu, y) = min_symmetric_eig(&c);
    // Back-transform the eigenvector: x = L^{-T} y.
    let mut x = y;
    l.transpose().solve_upper_triangular_mut(&mut x);
    Ok((mu, x))
}

/// Symmetric positive-(semi)definite square root via eigendecomposition.
///
/// Eigenvalues below `-tol * scale` are rejected; small negative round-off
/// is clamped to zero.
pub fn spd_sqrt(m: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let eig = m.clone().symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1e-300);
    let mut d = eig.eigenvalues.clone();
    for v in d.iter_mut() {
        if *v < -tol * scale {
            return Err(Error::precondition(format!(
                "operator is not positive semidefinite: eigenvalue {v:.3e}"
            )));
        }
        *v = v.max(0.0).sqrt();
    }
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&d) * q.transpose())
}

/// Symmetric tridiagonal matrix stored as diagonal and off-diagonal bands.
#[derive(Debug, Clone)]
pub struct TridiagSym {
    pub diag: DVector<f64>,
    pub off: DVector<f64>,
}

impl TridiagSym {
    pub fn zeros(n: usize) -> Self {
        TridiagSym {
            diag: DVector::zeros(n),
            off: DVector::zeros(n.saturating_sub(1)),
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.off[i];
                m[(i + 1, i)] = self.off[i];
            }
        }
        m
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.len();
        let mut y = DVector::zeros(n);
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    pub fn quadratic_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&self.mul_vec(x))
    }

    /// Number of eigenvalues of the pencil `(self, mass)` strictly below `mu`,
    /// by the Sturm sequence of `self - mu * mass`.
    fn count_below(&self, mass: &TridiagSym, mu: f64) -> usize {
        let n = self.len();
        let mut count = 0;
        let mut d = self.diag[0] - mu * mass.diag[0];
        if d < 0.0 {
            count += 1;
        }
        for i in 1..n {
            let e = self.off[i - 1] - mu * mass.off[i - 1];
            // Recurrence d_i = a_i - e^2 / d_{i-1}; guard tiny pivots.
            let pivot = if d.abs() < 1e-300 {
                1e-300 * d.signum_or_one()
            } else {
                d
            };
            d = (self.diag[i] - mu * mass.diag[i]) - e * e / pivot;
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Smallest generalized eigenvalue (and eigenvector) of the pencil
    /// `self x = mu mass x` with `mass` positive definite, by bisection on
    /// the Sturm count plus one inverse-iteration step for the witness.
    pub fn pencil_min_eigen(&self, mass: &TridiagSym) -> (f64, DVector<f64>) {
        let n = self.len();
        // Bracket with the Rayleigh-quotient range estimated from Gershgorin
        // discs of both matrices.
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut wr = 0.0;
            let mut mr = 0.0;
            if i > 0 {
                wr += self.off[i - 1].abs();
                mr += mass.off[i - 1].abs();
            }
            if i + 1 < n {
                wr += self.off[i].abs();
                mr += mass.off[i].abs();
            }
            let m_lo = (mass.diag[i] - mr).max(1e-300);
            let w_lo = self.diag[i] - wr;
            let w_hi = self.diag[i] + wr;
            lo = lo.min(w_lo / m_lo).min(w_lo / (mass.diag[i] + mr));
            hi = hi.max(w_hi / m_lo);
        }
        let mut a = lo - 1.0;
        let mut b = hi + 1.0;
        debug_assert!(self.count_below(mass, a) == 0);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if self.count_below(mass, mid) == 0 {
                a = mid;
            } else {
                b = mid;
            }
            if b - a <= 1e-14 * (1.0 + a.abs().max(b.abs())) {
                break;
            }
        }
        let mu = 0.5 * (a + b);
        // Inverse iteration with shift just below the eigenvalue: the shifted
        // pencil is positive definite there, so the factorization is stable.
        let shift = a - 1e-10 * (1.0 + a.abs());
        let mut shifted = TridiagSym::zeros(n);
        for i in 0..n {
            shifted.diag[i] = self.diag[i] - shift * mass.diag[i];
        }
        for i in 0..n - 1 {
            shifted.off[i] = self.off[i] - shift * mass.off[i];
        }
        let mut x = DVector::from_element(n, 1.0 / (n as f64).sqrt());
        for _ in 0..8 {
            let rhs = mass.mul_vec(&x);
            x = shifted.solve_spd(&rhs);
            let norm = mass.quadratic_form(&x).sqrt();
            if norm > 0.0 {
                x /= norm;
            }
        }
        (mu, x)
    }

    /// Solve `self * x = b` assuming positive definiteness (LDL^T, no pivoting).
    fn solve_spd(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.len();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        d[0] = self.diag[0];
        for i in 1..n {
            l[i - 1] = self.off[i - 1] / d[i - 1];
            d[i] = self.diag[i] - l[i - 1] * self.off[i - 1];
        }
        let mut x = b.clone();
        for i in 1..n {
            let delta = l[i - 1] * x[i - 1];
            x[i] -= delta;
        }
        for i in 0..n {
            x[i] /= d[i];
        }
        for i in (0..n - 1).rev() {
            let delta = l[i] * x[i + 1];
            x[i] -= delta;
        }
        x
    }
}

trait SignumOrOne {
    fn signum_or_one(self) -> f64;
}

impl SignumOrOne for f64 {
    fn signum_or_one(self) -> f64 {
        if self == 0.0 {
            1.0
        } else {
            self.signum()
        }
    }
}

/// Least-squares line `y = intercept + slope * x`; returns (slope, intercept, r2).
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return (0.0, my, 1.0);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = syy - slope * sxy;
    let r2 = if syy > 0.0 {
        1.0 - (ss_res / syy).max(0.0)
    } else {
        1.0
    };
    (slope, intercept, r2)
}
