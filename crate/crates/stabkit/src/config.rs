//! Shared numerical configuration.
//!
//! Two tolerance tiers are used throughout: `tol_algebraic` for identities
//! that hold exactly in real arithmetic, and `tol_sampled` for quantities
//! estimated from samples or fitted from data.

#[derive(Debug, Clone, Copy)]
pub struct Config {
    /// Tolerance for algebraic identities (symmetry, exact formulas).
    pub tol_algebraic: f64,
    /// Tolerance for sampled estimates and fits.
    pub tol_sampled: f64,
    /// Gauss-Legendre node count used as the starting resolution for
    /// time quadrature; doubled until the assembled matrix stabilizes.
    pub quad_points: usize,
    /// Hard cap on quadrature refinement.
    pub quad_points_max: usize,
    /// Number of random starts for sphere minimization.
    pub multistart: usize,
    /// Relative tolerance of the adaptive integrator.
    pub ode_rtol: f64,
    /// Absolute tolerance of the adaptive integrator.
    pub ode_atol: f64,
    /// Norm-growth factor that triggers a divergence report.
    pub blowup_factor: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            tol_algebraic: 1e-10,
            tol_sampled: 1e-6,
            quad_points: 64,
            quad_points_max: 1024,
            multistart: 32,
            ode_rtol: 1e-9,
            ode_atol: 1e-12,
            blowup_factor: 1e12,
        }
    }
}
