//! Benchmark stochastic optimization problems.
//!
//! A [`Problem`] packages the cost `h(u, w)`, a product density for the
//! random vector `W` on a box domain, optional analytic u-derivatives of the
//! cost, optional box constraints on `u`, and (when known) the reference
//! minimizer. Quadrature always happens on the reference cube `[-1, 1]^d`;
//! [`Problem::reference_integrand`] composes the affine domain map, the
//! density, and the Jacobian so the quadrature modules never see the domain.

use crate::error::{Error, Result};
use crate::rules1d::{self, RuleFamily};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;
use std::sync::Arc;

/// One i.i.d. coordinate of the random vector.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    Uniform { lo: f64, hi: f64 },
    /// Beta(alpha, beta) on [0, 1] with alpha, beta >= 1 so the density stays
    /// bounded on the closed interval.
    Beta { alpha: f64, beta: f64 },
}

impl Marginal {
    pub fn support(&self) -> (f64, f64) {
        match self {
            Marginal::Uniform { lo, hi } => (*lo, *hi),
            Marginal::Beta { .. } => (0.0, 1.0),
        }
    }

    pub fn density(&self, w: f64) -> f64 {
        match self {
            Marginal::Uniform { lo, hi } => {
                if w < *lo || w > *hi {
                    0.0
                } else {
                    1.0 / (hi - lo)
                }
            }
            Marginal::Beta { alpha, beta } => beta_pdf(*alpha, *beta, w),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Marginal::Uniform { lo, hi } => 0.5 * (lo + hi),
            Marginal::Beta { alpha, beta } => alpha / (alpha + beta),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Marginal::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
            Marginal::Beta { alpha, beta } => {
                let s = alpha + beta;
                alpha * beta / (s * s * (s + 1.0))
            }
        }
    }

    /// `E[W^2] = Var W + (E W)^2`.
    pub fn second_moment(&self) -> f64 {
        let m = self.mean();
        self.variance() + m * m
    }

    /// Inverse CDF. The Beta quantile is found by bisection on the
    /// regularized incomplete beta function.
    pub fn quantile(&self, p: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&p));
        match self {
            Marginal::Uniform { lo, hi } => lo + p * (hi - lo),
            Marginal::Beta { alpha, beta } => {
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if beta_reg(*alpha, *beta, mid) < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }
}

fn beta_pdf(alpha: f64, beta: f64, w: f64) -> f64 {
    if !(0.0..=1.0).contains(&w) {
        return 0.0;
    }
    // log form via ln-gamma for stability
    let ln_b = ln_gamma(alpha) + ln_gamma(beta) - ln_gamma(alpha + beta);
    let ta = if alpha == 1.0 { 0.0 } else { (alpha - 1.0) * w.ln() };
    let tb = if beta == 1.0 {
        0.0
    } else {
        (beta - 1.0) * (1.0 - w).ln()
    };
    let v = (ta + tb - ln_b).exp();
    if v.is_nan() {
        0.0
    } else {
        v
    }
}

/// Product of independent marginals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProductDensity {
    pub marginals: Vec<Marginal>,
}

impl ProductDensity {
    pub fn iid(marginal: Marginal, d: usize) -> Self {
        Self {
            marginals: vec![marginal; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn density(&self, w: &[f64]) -> f64 {
        self.marginals
            .iter()
            .zip(w)
            .map(|(m, &x)| m.density(x))
            .product()
    }

    pub fn mean(&self) -> Vec<f64> {
        self.marginals.iter().map(Marginal::mean).collect()
    }
}

/// Known solution of a benchmark problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Reference {
    pub u_star: Vec<f64>,
    pub f_star: f64,
}

type CostFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;
type HessFn = dyn Fn(&[f64], &[f64], &mut DMatrix<f64>) + Send + Sync;

/// A stochastic optimization problem `min_u E[h(u, W)]`.
#[derive(Clone)]
pub struct Problem {
    pub name: String,
    dim_w: usize,
    dim_u: usize,
    pub density: ProductDensity,
    cost: Arc<CostFn>,
    cost_grad: Option<Arc<GradFn>>,
    cost_hess: Option<Arc<HessFn>>,
    pub u_box: Option<Vec<(f64, f64)>>,
    pub reference: Option<Reference>,
}

impl Problem {
    /// Registers a problem after checking that the density integrates to 1
    /// over the domain (per marginal, and on the full tensor grid for
    /// d <= 2).
    pub fn new(
        name: impl Into<String>,
        density: ProductDensity,
        dim_u: usize,
        cost: Arc<CostFn>,
    ) -> Result<Self> {
        let problem = Self {
            name: name.into(),
            dim_w: density.dim(),
            dim_u,
            density,
            cost,
            cost_grad: None,
            cost_hess: None,
            u_box: None,
            reference: None,
        };
        problem.check_normalization()?;
        Ok(problem)
    }

    fn check_normalization(&self) -> Result<()> {
        let rule = rules1d::make_rule(RuleFamily::ClenshawCurtis, 9)?;
        let mut full = 1.0;
        for m in &self.density.marginals {
            let (lo, hi) = m.support();
            let half = 0.5 * (hi - lo);
            let mass = rule.apply(|x| m.density(lo + (x + 1.0) * half) * half);
            if (mass - 1.0).abs() > 1e-8 {
                return Err(Error::DensityNotNormalized { got: mass });
            }
            full *= mass;
        }
        if self.dim_w <= 2 && (full - 1.0).abs() > 1e-8 {
            return Err(Error::DensityNotNormalized { got: full });
        }
        Ok(())
    }

    pub fn with_grad(mut self, grad: Arc<GradFn>) -> Self {
        self.cost_grad = Some(grad);
        self
    }

    pub fn with_hess(mut self, hess: Arc<HessFn>) -> Self {
        self.cost_hess = Some(hess);
        self
    }

    pub fn with_u_box(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.u_box = Some(bounds);
        self
    }

    pub fn with_reference(mut self, reference: Reference) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn dim_w(&self) -> usize {
        self.dim_w
    }

    pub fn dim_u(&self) -> usize {
        self.dim_u
    }

    pub fn cost(&self, u: &[f64], w: &[f64]) -> f64 {
        (self.cost)(u, w)
    }

    pub fn has_analytic_grad(&self) -> bool {
        self.cost_grad.is_some()
    }

    pub fn has_analytic_hess(&self) -> bool {
        self.cost_hess.is_some()
    }

    /// Analytic `d h / d u`, when the problem ships one.
    pub fn cost_grad(&self, u: &[f64], w: &[f64], out: &mut [f64]) -> bool {
        match &self.cost_grad {
            Some(g) => {
                g(u, w, out);
                true
            }
            None => false,
        }
    }

    /// Analytic `d^2 h / d u^2`, when the problem ships one.
    pub fn cost_hess(&self, u: &[f64], w: &[f64], out: &mut DMatrix<f64>) -> bool {
        match &self.cost_hess {
            Some(h) => {
                h(u, w, out);
                true
            }
            None => false,
        }
    }

    /// The box the random vector lives on, from the marginal supports.
    pub fn domain(&self) -> Vec<(f64, f64)> {
        self.density.marginals.iter().map(Marginal::support).collect()
    }

    /// Maps a point of the reference cube `[-1, 1]^d` into the domain box and
    /// returns the constant Jacobian of the affine map.
    pub fn map_to_reference(&self, w_ref: &[f64]) -> (Vec<f64>, f64) {
        debug_assert_eq!(w_ref.len(), self.dim_w);
        let mut w = Vec::with_capacity(self.dim_w);
        let mut jac = 1.0;
        for (m, &x) in self.density.marginals.iter().zip(w_ref) {
            let (lo, hi) = m.support();
            let half = 0.5 * (hi - lo);
            w.push(lo + (x + 1.0) * half);
            jac *= half;
        }
        (w, jac)
    }

    /// Wraps a function of `w` on the domain into the weighted integrand on
    /// the reference cube: `phi(w(x)) p(w(x)) |J|`, so that its integral over
    /// `[-1, 1]^d` equals `E[phi(W)]`.
    pub fn reference_integrand<'a, F>(&'a self, phi: F) -> impl Fn(&[f64]) -> f64 + 'a
    where
        F: Fn(&[f64]) -> f64 + 'a,
    {
        move |x: &[f64]| {
            let (w, jac) = self.map_to_reference(x);
            phi(&w) * self.density.density(&w) * jac
        }
    }
}

/// The 2D toy problem: `F(u) = E[u^2 + (W_1^2 + 10 W_2^2) u]` with
/// `W_k ~ Beta(5, 5)` i.i.d. The gradient is `G(u) = 2u + 3`, the minimizer
/// `u* = -1.5` with minimum `-2.25`.
pub fn toy_problem() -> Problem {
    let density = ProductDensity::iid(Marginal::Beta { alpha: 5.0, beta: 5.0 }, 2);
    Problem::new(
        "toy",
        density,
        1,
        Arc::new(|u: &[f64], w: &[f64]| {
            let c = w[0] * w[0] + 10.0 * w[1] * w[1];
            u[0] * u[0] + c * u[0]
        }),
    )
    .expect("toy density normalizes")
    .with_grad(Arc::new(|u: &[f64], w: &[f64], out: &mut [f64]| {
        out[0] = 2.0 * u[0] + w[0] * w[0] + 10.0 * w[1] * w[1];
    }))
    .with_hess(Arc::new(|_u: &[f64], _w: &[f64], out: &mut DMatrix<f64>| {
        out[(0, 0)] = 2.0;
    }))
    .with_reference(Reference {
        u_star: vec![-1.5],
        f_star: -2.25,
    })
}

/// `integral_0^1 e^{-t^2} dt`, evaluated by a high-level 1D rule.
pub fn gauss_tail_integral() -> f64 {
    let rule = rules1d::make_rule(RuleFamily::ClenshawCurtis, 9).expect("supported level");
    rule.apply(|x| {
        let t = 0.5 * (x + 1.0);
        0.5 * (-t * t).exp()
    })
}

/// The d-dimensional additive problem: `F(u) = E[sum_i exp(-u_i W_i^2)]`
/// with `W_i ~ U(0, 1)` and `u` constrained to `[0, 1]^d`. The gradient is
/// componentwise nonpositive on the box, so the minimizer is `u* = (1,...,1)`.
pub fn additive_problem(d: usize) -> Problem {
    assert!(d >= 1);
    let density = ProductDensity::iid(Marginal::Uniform { lo: 0.0, hi: 1.0 }, d);
    let f_star = d as f64 * gauss_tail_integral();
    Problem::new(
        "additive",
        density,
        d,
        Arc::new(|u: &[f64], w: &[f64]| {
            u.iter()
                .zip(w)
                .map(|(&ui, &wi)| (-ui * wi * wi).exp())
                .sum()
        }),
    )
    .expect("uniform density normalizes")
    .with_grad(Arc::new(|u: &[f64], w: &[f64], out: &mut [f64]| {
        for ((&ui, &wi), o) in u.iter().zip(w).zip(out.iter_mut()) {
            let w2 = wi * wi;
            *o = -w2 * (-ui * w2).exp();
        }
    }))
    .with_hess(Arc::new(|u: &[f64], w: &[f64], out: &mut DMatrix<f64>| {
        out.fill(0.0);
        for k in 0..u.len() {
            let w2 = w[k] * w[k];
            out[(k, k)] = w2 * w2 * (-u[k] * w2).exp();
        }
    }))
    .with_u_box(vec![(0.0, 1.0); d])
    .with_reference(Reference {
        u_star: vec![1.0; d],
        f_star,
    })
}

/// A discrete-time linear-quadratic open-loop control instance:
/// states `X = A X + B u + C W + x0 e_0`, cost `u^T P u + X^T Q X`.
#[derive(Debug, Clone)]
pub struct LQControl {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub x0: f64,
}

/// Solved affine form of the dynamics: `X = M u + N w + base`.
struct LqParts {
    m: DMatrix<f64>,
    n: DMatrix<f64>,
    base: DVector<f64>,
}

impl LQControl {
    pub fn d(&self) -> usize {
        self.a.nrows()
    }

    /// The repository fixture: a 0.5-weight subdiagonal shift for A (each
    /// state leans on its predecessor), identity B, C, P, Q, and x0 = 1.
    pub fn shift_fixture(d: usize) -> Self {
        let mut a = DMatrix::zeros(d, d);
        for i in 1..d {
            a[(i, i - 1)] = 0.5;
        }
        Self {
            a,
            b: DMatrix::identity(d, d),
            c: DMatrix::identity(d, d),
            p: DMatrix::identity(d, d),
            q: DMatrix::identity(d, d),
            x0: 1.0,
        }
    }

    fn parts(&self) -> Result<LqParts> {
        let d = self.d();
        let i_minus_a = DMatrix::identity(d, d) - &self.a;
        let inv = i_minus_a.try_inverse().ok_or(Error::SingularSystem)?;
        let mut e0 = DVector::zeros(d);
        e0[0] = self.x0;
        Ok(LqParts {
            m: &inv * &self.b,
            n: &inv * &self.c,
            base: &inv * e0,
        })
    }

    /// `P + M^T Q M`, the constant Hessian factor of the reduced cost.
    fn reduced_hessian(&self, parts: &LqParts) -> DMatrix<f64> {
        &self.p + parts.m.transpose() * &self.q * &parts.m
    }
}

/// Builds the reduced stochastic problem `h(u, W) = u^T P u + x^T Q x` with
/// `x = (I - A)^{-1} (B u + C W + x0 e_0)` over i.i.d. marginals.
pub fn lq_control_problem(spec: &LQControl, marginals: Vec<Marginal>) -> Result<Problem> {
    let d = spec.d();
    if marginals.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: marginals.len(),
        });
    }
    let parts = spec.parts()?;
    let h = spec.reduced_hessian(&parts);
    if h.clone().cholesky().is_none() {
        return Err(Error::InvalidConfig(
            "P + M^T Q M is not positive definite".into(),
        ));
    }

    let density = ProductDensity { marginals };
    let (m, n, base, p, q) = (
        parts.m.clone(),
        parts.n.clone(),
        parts.base.clone(),
        spec.p.clone(),
        spec.q.clone(),
    );
    let state = move |u: &[f64], w: &[f64]| -> DVector<f64> {
        let uv = DVector::from_column_slice(u);
        let wv = DVector::from_column_slice(w);
        &m * uv + &n * wv + &base
    };
    let cost_state = state.clone();
    let cost = {
        let (p, q) = (p.clone(), q.clone());
        move |u: &[f64], w: &[f64]| -> f64 {
            let uv = DVector::from_column_slice(u);
            let x = cost_state(u, w);
            (uv.transpose() * &p * &uv)[(0, 0)] + (x.transpose() * &q * &x)[(0, 0)]
        }
    };
    let grad_state = state;
    let grad = {
        let (p, q, m) = (p.clone(), q.clone(), parts.m.clone());
        move |u: &[f64], w: &[f64], out: &mut [f64]| {
            let uv = DVector::from_column_slice(u);
            let x = grad_state(u, w);
            let g = 2.0 * (&p * uv) + 2.0 * (m.transpose() * (&q * x));
            out.copy_from_slice(g.as_slice());
        }
    };
    let hess_mat = 2.0 * spec.reduced_hessian(&parts);
    let hess = move |_u: &[f64], _w: &[f64], out: &mut DMatrix<f64>| {
        out.copy_from(&hess_mat);
    };

    Ok(Problem::new("lq_control", density, d, Arc::new(cost))?
        .with_grad(Arc::new(grad))
        .with_hess(Arc::new(hess)))
}

/// The certainty-equivalence minimizer: the stochastic LQ problem shares its
/// solution with the deterministic problem where `W` is replaced by its
/// mean, so `u*` solves `(P + M^T Q M) u = -M^T Q (N mean + base)`.
pub fn certainty_equivalence_solution(spec: &LQControl, mean_w: &[f64]) -> Result<Vec<f64>> {
    let parts = spec.parts()?;
    let h = spec.reduced_hessian(&parts);
    let v = &parts.n * DVector::from_column_slice(mean_w) + &parts.base;
    let rhs = -(parts.m.transpose() * (&spec.q * v));
    let u = h.lu().solve(&rhs).ok_or(Error::SingularSystem)?;
    Ok(u.as_slice().to_vec())
}

/// Closed-form objective of the LQ problem under a product density:
/// `F(u) = u^T P u + mu^T Q mu + sum_k var_k (N^T Q N)_{kk}` where
/// `mu = M u + N mean + base`.
pub fn lq_objective_exact(spec: &LQControl, marginals: &[Marginal], u: &[f64]) -> Result<f64> {
    let parts = spec.parts()?;
    let mean = DVector::from_iterator(marginals.len(), marginals.iter().map(Marginal::mean));
    let uv = DVector::from_column_slice(u);
    let mu = &parts.m * &uv + &parts.n * mean + &parts.base;
    let ntqn = parts.n.transpose() * &spec.q * &parts.n;
    let noise: f64 = marginals
        .iter()
        .enumerate()
        .map(|(k, m)| m.variance() * ntqn[(k, k)])
        .sum();
    Ok((uv.transpose() * &spec.p * &uv)[(0, 0)] + (mu.transpose() * &spec.q * &mu)[(0, 0)] + noise)
}

/// JSON-loadable problem description for the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "snake_case")]
pub enum ProblemConfig {
    Toy,
    Additive {
        d: usize,
    },
    LqControl {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
        p: Vec<Vec<f64>>,
        q: Vec<Vec<f64>>,
        x0: f64,
        marginals: Vec<Marginal>,
    },
}

fn to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidConfig("matrices must be square".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl ProblemConfig {
    pub fn build(&self) -> Result<Problem> {
        match self {
            ProblemConfig::Toy => Ok(toy_problem()),
            ProblemConfig::Additive { d } => Ok(additive_problem(*d)),
            ProblemConfig::LqControl {
                a,
                b,
                c,
                p,
                q,
                x0,
                marginals,
            } => {
                let spec = LQControl {
                    a: to_matrix(a)?,
                    b: to_matrix(b)?,
                    c: to_matrix(c)?,
                    p: to_matrix(p)?,
                    q: to_matrix(q)?,
                    x0: *x0,
                };
                let mean = ProductDensity {
                    marginals: marginals.clone(),
                }
                .mean();
                let reference = certainty_equivalence_solution(&spec, &mean)?;
                let f_star = lq_objective_exact(&spec, marginals, &reference)?;
                Ok(lq_control_problem(&spec, marginals.clone())?.with_reference(Reference {
                    u_star: reference,
                    f_star,
                }))
            }
        }
    }
}
