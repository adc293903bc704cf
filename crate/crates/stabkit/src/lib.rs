//! Numerical toolkit for constant-gain stabilization of control-affine systems
//! `ż = Az + v(t)Bz`.
//!
//! The toolkit certifies observability-type lower bounds along the free
//! semigroup, turns certified constants into admissible constant-gain
//! intervals with explicit exponential-decay envelopes, checks the
//! finite-dimensional algebraic conditions (Lyapunov structure, Lie-bracket
//! rank), computes robustness margins for perturbed dynamics, and simulates
//! closed loops under constant, quadratic, normalized and switching feedback.
//!
//! Entry points:
//! - [`gallery`]: ready-made example systems with documented expected outcomes,
//! - [`certify`]: observability certificates over a horizon `T`,
//! - [`gain`]: constant-gain synthesis and decay envelopes,
//! - [`findim`]: algebraic stabilizability tests for matrices,
//! - [`simulate`]: closed-loop runs and empirical decay fitting,
//! - [`robust`]: admissible perturbation radii and margin validation,
//! - [`acceptance`]: the end-to-end verification suite.

pub mod acceptance;
pub mod certify;
pub mod config;
pub mod error;
pub mod findim;
pub mod gain;
pub mod gallery;
pub mod grid;
pub mod linalg;
pub mod modal;
pub mod modelfile;
pub mod ode;
pub mod operator;
pub mod report;
pub mod rng;
pub mod robust;
pub mod scenario;
pub mod semigroup;
pub mod simulate;
pub mod sphere;

pub use config::Config;
pub use error::{Error, Result};
pub use operator::{
    ControlOp, InnerProduct, LinearOp, NonlinearOp, SemigroupClass, StateVector, SystemModel,
};
