//! Piecewise-linear functions on a uniform grid over `[0, x_max]`.
//!
//! Grid states represent half-line profiles by their nodal values; the
//! interpolant is the actual function. All inner products and weighted
//! forms here are exact integrals of those interpolants, so the right-shift
//! semigroup and the multiplication operators of the transport example can
//! be evaluated without spatial discretization error.

use nalgebra::DVector;

use crate::linalg::TridiagSym;

/// Uniform grid with `n` nodes at `0, h, 2h, ..., (n-1)h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub h: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(h: f64, n: usize) -> Self {
        assert!(h > 0.0 && n >= 2);
        Grid { h, n }
    }

    /// Grid covering `[0, x_max]` with step `<= h_max` (step divides x_max).
    pub fn covering(x_max: f64, h_max: f64) -> Self {
        let cells = (x_max / h_max).ceil() as usize;
        Grid {
            h: x_max / cells as f64,
            n: cells + 1,
        }
    }

    pub fn x_max(&self) -> f64 {
        self.h * (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.h * i as f64
    }

    /// Value of the interpolant of `z` at `x` (zero outside `[0, x_max]`).
    pub fn eval(&self, z: &DVector<f64>, x: f64) -> f64 {
        if x < 0.0 || x > self.x_max() {
            return 0.0;
        }
        let s = x / self.h;
        let i = (s.floor() as usize).min(self.n - 2);
        let frac = s - i as f64;
        z[i] * (1.0 - frac) + z[i + 1] * frac
    }

    /// Mass matrix of the hat basis (exact L2 Gram), tridiagonal.
    pub fn mass(&self) -> TridiagSym {
        let mut m = TridiagSym::zeros(self.n);
        for i in 0..self.n {
            let cells = if i == 0 || i == self.n - 1 { 1.0 } else { 2.0 };
            m.diag[i] = cells * self.h / 3.0;
        }
        for i in 0..self.n - 1 {
            m.off[i] = self.h / 6.0;
        }
        m
    }

    /// Exact L2 inner product of two interpolants.
    pub fn l2_dot(&self, f: &DVector<f64>, g: &DVector<f64>) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n - 1 {
            s += self.h / 6.0
                * (2.0 * f[i] * g[i] + f[i] * g[i + 1] + f[i + 1] * g[i] + 2.0 * f[i + 1] * g[i + 1]);
        }
        s
    }

    pub fn l2_norm(&self, f: &DVector<f64>) -> f64 {
        self.l2_dot(f, f).max(0.0).sqrt()
    }
}

/// Right-continuous step function on `[0, inf)`: `values[k]` on
/// `[breaks[k], breaks[k+1])` and `tail` on `[last break, inf)`.
/// `breaks[0]` must be `0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
    pub tail: f64,
}

impl StepFunction {
    pub fn new(breaks: Vec<f64>, values: Vec<f64>, tail: f64) -> Self {
        assert_eq!(breaks.len(), values.len() + 1);
        assert_eq!(breaks[0], 0.0);
        assert!(breaks.windows(2).all(|w| w[1] > w[0]));
        StepFunction {
            breaks,
            values,
            tail,
        }
    }

    /// The transport-example gain profile: -1 on (0,1), +1 on [1,3], `c` beyond.
    pub fn transport_profile(c: f64) -> Self {
        StepFunction::new(vec![0.0, 1.0, 3.0], vec![-1.0, 1.0], c)
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        for k in 0..self.values.len() {
            if x < self.breaks[k + 1] {
                return self.values[k];
            }
        }
        self.tail
    }

    /// Pointwise square of the profile.
    pub fn squared(&self) -> StepFunction {
        StepFunction {
            breaks: self.breaks.clone(),
            values: self.values.iter().map(|v| v * v).collect(),
            tail: self.tail * self.tail,
        }
    }

    /// Essential supremum of |g| over `[0, inf)`.
    pub fn sup_abs(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.abs())
            .fold(self.tail.abs(), f64::max)
    }

    /// Antiderivative `G(x) = integral of g over [0, x]` (0 for x <= 0).
    pub fn antiderivative(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for k in 0..self.values.len() {
            let lo = self.breaks[k];
            let hi = self.breaks[k + 1];
            if x <= hi {
                return acc + self.values[k] * (x - lo);
            }
            acc += self.values[k] * (hi - lo);
        }
        acc + self.tail * (x - *self.breaks.last().unwrap())
    }

    /// `integral of g over [a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.antiderivative(b) - self.antiderivative(a)
    }

    /// Sorted interior breakpoints of `x -> g(x + shift)` inside `(lo, hi)`.
    fn breaks_within(&self, shift: f64, lo: f64, hi: f64) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .breaks
            .iter()
            .map(|b| b - shift)
            .filter(|&x| x > lo && x < hi)
            .collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts
    }
}

/// Exact integral of `w(x + shift) * f(x) * g(x)` over the grid domain for
/// interpolants `f, g` and a step weight `w`. The integrand is quadratic on
/// each refinement piece, so two-point Gauss per piece is exact.
pub fn weighted_dot(grid: &Grid, w: &StepFunction, shift: f64, f: &DVector<f64>, g: &DVector<f64>) -> f64 {
    let mut total = 0.0;
    const GA: f64 = 0.211_324_865_405_187_12; // (1 - 1/sqrt(3)) / 2
    const GB: f64 = 0.788_675_134_594_812_9;
    for i in 0..grid.n - 1 {
        let lo = grid.node(i);
        let hi = grid.node(i + 1);
        let mut pts = vec![lo];
        pts.extend(w.breaks_within(shift, lo, hi));
        pts.push(hi);
        for seg in pts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            if b <= a {
                continue;
            }
            let len = b - a;
            for frac in [GA, GB] {
                let x = a + frac * len;
                total += 0.5 * len * w.eval(x + shift) * grid.eval(f, x) * grid.eval(g, x);
            }
        }
    }
    total
}

/// Tridiagonal matrix of the form `f, g -> integral w(x + shift) f g` over
/// the hat basis.
pub fn weighted_form(grid: &Grid, w: &StepFunction, shift: f64) -> TridiagSym {
    let mut out = TridiagSym::zeros(grid.n);
    let mut e_i = DVector::zeros(grid.n);
    let mut e_j = DVector::zeros(grid.n);
    for i in 0..grid.n {
        e_i[i] = 1.0;
        out.diag[i] = weighted_dot(grid, w, shift, &e_i, &e_i);
        if i + 1 < grid.n {
            e_j[i + 1] = 1.0;
            out.off[i] = weighted_dot(grid, w, shift, &e_i, &e_j);
            e_j[i + 1] = 0.0;
        }
        e_i[i] = 0.0;
    }
    out
}

/// Time-integrated observation weight of the shift semigroup:
/// `w_T(u) = integral of g(u + s) ds over [0, T]`, a piecewise-linear
/// function evaluated exactly through the antiderivative.
pub fn horizon_weight(g: &StepFunction, t_horizon: f64) -> impl Fn(f64) -> f64 + '_ {
    move |u: f64| g.antiderivative(u + t_horizon) - g.antiderivative(u)
}

/// Tridiagonal form `f, g -> integral w_T(u) f(u) g(u) du` with the exact
/// horizon weight (piecewise linear), used by the observability Gramian of
/// shift models. Pieces are cubic, so two-point Gauss stays exact.
pub fn horizon_form(grid: &Grid, g: &StepFunction, t_horizon: f64) -> TridiagSym {
    let w = horizon_weight(g, t_horizon);
    const GA: f64 = 0.211_324_865_405_187_12;
    const GB: f64 = 0.788_675_134_594_812_9;
    // Hat products are quadratic per cell; w_T is linear except at its own
    // kinks (g-breaks shifted by 0 or -T), so refine each cell there.
    let mut kinks: Vec<f64> = Vec::new();
    for b in &g.breaks {
        kinks.push(*b);
        kinks.push(*b - t_horizon);
    }
    let cell_integral = |i: usize, j: usize, cell: usize| -> f64 {
        let a0 = grid.node(cell);
        let b0 = grid.node(cell + 1);
        let mut pts = vec![a0];
        for k in &kinks {
            if *k > a0 && *k < b0 {
                pts.push(*k);
            }
        }
        pts.push(b0);
        pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut acc = 0.0;
        for seg in pts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let len = b - a;
            if len <= 0.0 {
                continue;
            }
            for frac in [GA, GB] {
                let x = a + frac * len;
                acc += 0.5 * len * w(x) * hat_value(grid, i, x) * hat_value(grid, j, x);
            }
        }
        acc
    };
    let mut out = TridiagSym::zeros(grid.n);
    for i in 0..grid.n {
        let mut acc = 0.0;
        if i > 0 {
            acc += cell_integral(i, i, i - 1);
        }
        if i + 1 < grid.n {
            acc += cell_integral(i, i, i);
            out.off[i] = cell_integral(i, i + 1, i);
        }
        out.diag[i] = acc;
    }
    out
}

fn hat_value(grid: &Grid, i: usize, x: f64) -> f64 {
    let xi = grid.node(i);
    let d = (x - xi).abs() / grid.h;
    if d >= 1.0 {
        0.0
    } else {
        1.0 - d
    }
}

/// Result of applying the right-shift semigroup on the grid.
#[derive(Debug, Clone)]
pub struct ShiftResult {
    pub values: DVector<f64>,
    /// True when support was pushed past the grid end and mass was dropped.
    pub truncated: bool,
}

/// Right shift by `t >= 0` with zero inflow, realized as the L2-orthogonal
/// projection of the exactly shifted interpolant back onto the grid space.
///
/// Orthogonal projection keeps the contraction property (`|out| <= |z|`)
/// that nodal resampling would not guarantee; for shifts that are an exact
/// multiple of `h` it reduces to the index shift.
pub fn shift_semigroup(grid: &Grid, z: &DVector<f64>, t: f64) -> ShiftResult {
    assert!(t >= 0.0, "shift semigroup is defined for t >= 0");
    let n = grid.n;
    if t == 0.0 {
        return ShiftResult {
            values: z.clone(),
            truncated: false,
        };
    }
    if t > grid.x_max() {
        return ShiftResult {
            values: DVector::zeros(n),
            truncated: z.iter().any(|v| *v != 0.0),
        };
    }
    let steps = t / grid.h;
    if (steps - steps.round()).abs() < 1e-13 && steps.round() >= 0.0 {
        let k = steps.round() as usize;
        let mut out = DVector::zeros(n);
        for i in k..n {
            out[i] = z[i - k];
        }
        let truncated = (n - k..n).any(|i| z[i] != 0.0);
        return ShiftResult {
            values: out,
            truncated,
        };
    }
    // b_i = <z(. - t), e_i> computed exactly: hat e_i against the shifted
    // interpolant, integrated piece by piece (products of linears).
    let mut b = DVector::zeros(n);
    const GA: f64 = 0.211_324_865_405_187_12;
    const GB: f64 = 0.788_675_134_594_812_9;
    for i in 0..n {
        let lo = (grid.node(i) - grid.h).max(t).max(0.0);
        let hi = (grid.node(i) + grid.h).min(grid.x_max());
        if hi <= lo {
            continue;
        }
        // Breakpoints: hat node and source-grid nodes shifted by t.
        let mut pts = vec![lo, hi];
        if grid.node(i) > lo && grid.node(i) < hi {
            pts.push(grid.node(i));
        }
        let k_lo = ((lo - t) / grid.h).floor() as i64;
        let k_hi = ((hi - t) / grid.h).ceil() as i64;
        for k in k_lo..=k_hi {
            let x = k as f64 * grid.h + t;
            if x > lo && x < hi {
                pts.push(x);
            }
        }
        pts.sort_by(|a, c| a.partial_cmp(c).unwrap());
        let mut acc = 0.0;
        for seg in pts.windows(2) {
            let (a, c) = (seg[0], seg[1]);
            let len = c - a;
            if len <= 0.0 {
                continue;
            }
            for frac in [GA, GB] {
                let x = a + frac * len;
                acc += 0.5 * len * hat_value(grid, i, x) * grid.eval(z, x - t);
            }
        }
        b[i] = acc;
    }
    let mass = grid.mass();
    let mut out = solve_tridiag(&mass, &b);
    // Projection is contractive in exact arithmetic; shield round-off.
    let nz = grid.l2_norm(z);
    let no = grid.l2_norm(&out);
    if no > nz && no > 0.0 {
        out *= nz / no;
    }
    let truncated = grid.eval(z, grid.x_max() - t).abs() > 0.0
        || (0..n).any(|i| grid.node(i) > grid.x_max() - t && z[i] != 0.0);
    ShiftResult {
        values: out,
        truncated,
    }
}

fn solve_tridiag(m: &TridiagSym, b: &DVector<f64>) -> DVector<f64> {
    // Thomas algorithm; the mass matrix is strictly diagonally dominant.
    let n = m.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = m.off[0] / m.diag[0];
    d[0] = b[0] / m.diag[0];
    for i in 1..n {
        let denom = m.diag[i] - m.off[i - 1] * c[i - 1];
        if i < n - 1 {
            c[i] = m.off[i] / denom;
        }
        d[i] = (b[i] - m.off[i - 1] * d[i - 1]) / denom;
    }
    let mut x = DVector::zeros(n);
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}
