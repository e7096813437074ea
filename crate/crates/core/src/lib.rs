//! Large-time cumulants of the KPZ equation on an interval.
//!
//! The cumulants `c_k(u, v, L)` of the height are obtained from a weight
//! `Psi(w)` on the imaginary axis and a digamma kernel, either through
//! closed formulas (k <= 3) or through the power-series solution of the
//! functional equation `U = -1/2 log(1 - 2 zeta Psi exp(k U))`.
//! Independent routes (shifted-contour kernel, periodic specialization,
//! large-L scaling, Brownian Monte Carlo) are provided for cross-checks.

pub mod cumulants;
pub mod error;
pub mod fixedpoint;
pub mod largel;
pub mod mc;
pub mod model;
pub mod periodic;
pub mod quadrature;
pub mod series;
pub mod specfun;
pub mod validate;

pub use error::{Error, Result};
pub use model::BoundaryParams;

/// Default number of contour nodes.
pub const DEFAULT_NODES: usize = 400;
/// Default series order.
pub const DEFAULT_KMAX: usize = 4;
/// Default fixed-point tolerance.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Default RNG seed.
pub const DEFAULT_SEED: u64 = 42;
