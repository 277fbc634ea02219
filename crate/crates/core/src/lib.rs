//! Stochastic optimization by "optimise then discretise": Newton-type solvers
//! whose objective, gradient, and Hessian evaluations are expectations
//! computed by dimension-adaptive sparse-grid quadrature.
//!
//! The crate is organised bottom-up:
//!
//! - [`rules1d`]: nested 1D quadrature families (trapezoidal, Clenshaw-Curtis,
//!   Gauss-Patterson) and their hierarchical difference rules.
//! - [`grid_index`]: multi-indices and downward-closed index sets.
//! - [`sg_quadrature`]: tensor surpluses, product rules, classical and
//!   generalized sparse grids over a given downset.
//! - [`adaptive`]: the greedy dimension-adaptive quadrature and its error
//!   bounds.
//! - [`problems`]: benchmark problems (2D toy, high-dimensional additive,
//!   linear-quadratic open-loop control) with densities and references.
//! - [`mc`]: seeded Monte Carlo expectation estimates.
//! - [`solver`]: discretised Newton and BFGS engines, surrogate (fixed
//!   quadrature) minimization, and solve traces.
//! - [`stopping`]: breakdown detection and the surrogate-trend stopping rule.

pub mod adaptive;
pub mod error;
pub mod grid_index;
pub mod mc;
pub mod problems;
pub mod rules1d;
pub mod sg_quadrature;
pub mod solver;
pub mod stopping;

pub use error::{Error, Result};

/// Default cap on integrand evaluations per quadrature call.
pub const DEFAULT_MAX_EVALUATIONS: usize = 10_000_000;

pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        n if n <= 8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}
