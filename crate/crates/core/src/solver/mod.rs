//! Discretised Newton-type optimization engines.
//!
//! All engines share the same skeleton: at each iterate the gradient (and for
//! Newton the Hessian) is an expectation estimated under a [`QuadSpec`], and
//! the step is damped either by a dense linear solve or by a quasi-Newton
//! direction with a line search on the estimated objective. Every iteration
//! is recorded in a [`SolverTrace`] that serializes to JSON lines and a
//! summary CSV.

pub mod estimate;
pub mod line_search;

pub use estimate::{
    estimate_gradient, estimate_gradient_analytic, estimate_gradient_with, estimate_hessian,
    estimate_hessian_with, expectation, DerivativeScheme, DiffMode, Estimate, GradientEstimate,
    HessianEstimate, QuadSpec,
};
pub use line_search::{backtracking, exact_quadratic, strong_wolfe, LineSearch, SearchOutcome};

use crate::error::{Error, Result};
use crate::grid_index::Downset;
use crate::mc;
use crate::problems::Problem;
use crate::rules1d::RuleFamily;
use crate::sg_quadrature::{classical_sparse_downset, downset_point_set};
use crate::stopping::{breakdown_check, BreakdownInputs, KConstants, TrendDecision, TrendMonitor};
use crate::DEFAULT_MAX_EVALUATIONS;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::io::Write;

/// Which optimization engine drives the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Engine {
    Newton,
    Bfgs,
    /// BFGS with iterates clamped to the problem's u-box after each step;
    /// the line search walks the projected path with Armijo backtracking.
    ProjectedBfgs,
}

/// Where derivative integrands come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientSource {
    /// Forward differences of the cost pushed through quadrature.
    FiniteDifference,
    /// The problem's analytic cost derivatives (when shipped).
    Analytic,
}

/// Addresses one derivative component for per-component quadrature choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentKey {
    Objective,
    Grad(usize),
    Hess(usize, usize),
}

/// Surrogate-trend stopping configuration.
#[derive(Debug, Clone, Copy)]
pub struct TrendConfig {
    pub probe_epsilon: f64,
    pub patience: usize,
}

/// Breakdown-check configuration; the inequality is evaluated each iteration
/// and recorded, and optionally halts the solve.
#[derive(Debug, Clone)]
pub struct BreakdownConfig {
    pub error_estimate: Option<f64>,
    pub constants: Option<KConstants>,
    pub halt: bool,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub engine: Engine,
    /// Stop once the (projected) gradient norm falls below this.
    pub grad_tol: f64,
    pub max_iters: usize,
    pub gradient_quad: QuadSpec,
    /// Objective estimates default to the gradient's quadrature.
    pub objective_quad: Option<QuadSpec>,
    /// Per-component overrides of the quadrature, realizing the general
    /// per-component discretised algorithms.
    pub per_component: Vec<(ComponentKey, QuadSpec)>,
    pub scheme: DerivativeScheme,
    pub gradient_source: GradientSource,
    pub line_search: LineSearch,
    pub trend: Option<TrendConfig>,
    pub breakdown: Option<BreakdownConfig>,
    /// Cap on integrand evaluations per quadrature call.
    pub budget: usize,
    /// Store per-component downsets in the trace.
    pub keep_downsets: bool,
    /// Newton only: log `||A^-1 H_fine - I||` with a finer-quadrature Hessian
    /// as a heuristic proxy of the Jacobian-accuracy condition.
    pub tau_diagnostic: bool,
    pub record_objective: bool,
}

impl SolverConfig {
    pub fn new(engine: Engine, gradient_quad: QuadSpec) -> Self {
        Self {
            engine,
            grad_tol: 1e-8,
            max_iters: 100,
            gradient_quad,
            objective_quad: None,
            per_component: Vec::new(),
            scheme: DerivativeScheme::default(),
            gradient_source: GradientSource::FiniteDifference,
            line_search: LineSearch::default(),
            trend: None,
            breakdown: None,
            budget: DEFAULT_MAX_EVALUATIONS,
            keep_downsets: false,
            tau_diagnostic: false,
            record_objective: true,
        }
    }

    fn lookup(&self, key: ComponentKey) -> Option<QuadSpec> {
        self.per_component
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, s)| s.clone())
    }

    fn grad_spec(&self, q: usize) -> QuadSpec {
        self.lookup(ComponentKey::Grad(q))
            .unwrap_or_else(|| self.gradient_quad.clone())
    }

    fn hess_spec(&self, i: usize, j: usize) -> QuadSpec {
        self.lookup(ComponentKey::Hess(i, j))
            .unwrap_or_else(|| self.gradient_quad.clone())
    }

    fn objective_spec(&self) -> QuadSpec {
        self.lookup(ComponentKey::Objective)
            .or_else(|| self.objective_quad.clone())
            .unwrap_or_else(|| self.gradient_quad.clone())
    }

    /// The trend probe reuses the adaptive family/cap of the objective (or
    /// gradient) quadrature at the probe threshold.
    fn probe_spec(&self, probe_epsilon: f64) -> QuadSpec {
        for spec in [&self.objective_spec(), &self.gradient_quad] {
            if let QuadSpec::Adaptive(cfg) = spec {
                let mut c = cfg.clone();
                c.epsilon = probe_epsilon;
                return QuadSpec::Adaptive(c);
            }
        }
        self.objective_spec()
    }
}

/// One row of the solve trace. Row `p` describes the iterate after `p`
/// steps; row 0 is the starting point.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub u: Vec<f64>,
    pub gradient: Vec<f64>,
    pub grad_norm: f64,
    pub objective: Option<f64>,
    /// Condition number of the Hessian estimate (Newton) or of the inverse
    /// BFGS approximation used for the next step.
    pub kappa: Option<f64>,
    pub gradient_points: usize,
    pub objective_points: usize,
    pub probe: Option<f64>,
    pub breakdown: Option<bool>,
    pub tau_proxy: Option<f64>,
    pub line_search_fallback: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub downsets: Option<Vec<Option<Downset>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HaltReason {
    GradientTolerance,
    MaxIterations,
    TrendStop { best_iteration: usize },
    NoProgress,
    SingularHessian,
    Breakdown,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverTrace {
    pub records: Vec<IterationRecord>,
    pub halt: HaltReason,
}

impl SolverTrace {
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    /// Total quadrature points divided by the number of records.
    pub fn average_points_per_iteration(&self) -> f64 {
        let total: usize = self
            .records
            .iter()
            .map(|r| r.gradient_points + r.objective_points)
            .sum();
        total as f64 / self.records.len().max(1) as f64
    }

    /// One JSON object per iteration.
    pub fn write_json_lines<W: Write>(&self, mut out: W) -> Result<()> {
        for rec in &self.records {
            serde_json::to_writer(&mut out, rec).map_err(std::io::Error::other)?;
            writeln!(out)?;
        }
        Ok(())
    }

    /// Fixed-schema summary: `iter,grad_norm,objective,points,kappa`.
    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iter,grad_norm,objective,points,kappa")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{:.17e},{},{},{}",
                r.iter,
                r.grad_norm,
                r.objective.map_or(String::from("nan"), |v| format!("{v:.17e}")),
                r.gradient_points + r.objective_points,
                r.kappa.map_or(String::from("nan"), |v| format!("{v:.6e}")),
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: Vec<f64>,
    pub objective: f64,
    pub trace: SolverTrace,
}

/// Componentwise clamp of `u` into the box.
pub fn projected_step(u: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    u.iter()
        .zip(bounds)
        .map(|(&x, &(lo, hi))| x.clamp(lo, hi))
        .collect()
}

/// One BFGS update of the inverse Hessian approximation:
/// `H <- (I - s y^T / s^T y) H (I - y s^T / s^T y) + s s^T / s^T y`.
pub fn bfgs_update(h: &DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
    let rho = 1.0 / s.dot(y);
    let n = h.nrows();
    let i = DMatrix::identity(n, n);
    let left = &i - rho * s * y.transpose();
    let right = &i - rho * y * s.transpose();
    left * h * right + rho * s * s.transpose()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

const SINGULAR_KAPPA: f64 = 1e12;
const MIN_STEP_NORM: f64 = 1e-15;
const CURVATURE_SKIP: f64 = 1e-12;

/// Shared estimator state of one solve: owns the Monte Carlo stream counter
/// so repeated estimates are reproducible yet independent.
struct Driver<'a> {
    problem: &'a Problem,
    cfg: &'a SolverConfig,
    mc_counter: u64,
}

impl<'a> Driver<'a> {
    fn new(problem: &'a Problem, cfg: &'a SolverConfig) -> Self {
        Self {
            problem,
            cfg,
            mc_counter: 0,
        }
    }

    fn gradient(&mut self, u: &[f64]) -> Result<GradientEstimate> {
        let cfg = self.cfg;
        match cfg.gradient_source {
            GradientSource::FiniteDifference => estimate_gradient_with(
                self.problem,
                u,
                &cfg.scheme,
                &|q| cfg.grad_spec(q),
                cfg.budget,
                &mut self.mc_counter,
            ),
            GradientSource::Analytic => estimate_gradient_analytic(
                self.problem,
                u,
                &|q| cfg.grad_spec(q),
                cfg.budget,
                &mut self.mc_counter,
            ),
        }
    }

    fn hessian(&mut self, u: &[f64]) -> Result<HessianEstimate> {
        let cfg = self.cfg;
        let analytic =
            cfg.gradient_source == GradientSource::Analytic && self.problem.has_analytic_hess();
        estimate_hessian_with(
            self.problem,
            u,
            &cfg.scheme,
            &|i, j| cfg.hess_spec(i, j),
            cfg.budget,
            &mut self.mc_counter,
            analytic,
        )
    }

    fn objective(&mut self, u: &[f64]) -> Result<Estimate> {
        let spec = self.cfg.objective_spec();
        expectation(
            self.problem,
            &spec,
            &|w| self.problem.cost(u, w),
            self.cfg.budget,
            &mut self.mc_counter,
        )
    }

    fn probe(&mut self, u: &[f64], probe_epsilon: f64) -> Result<Estimate> {
        let spec = self.cfg.probe_spec(probe_epsilon);
        expectation(
            self.problem,
            &spec,
            &|w| self.problem.cost(u, w),
            self.cfg.budget,
            &mut self.mc_counter,
        )
    }
}

fn validate(problem: &Problem, u0: &[f64], cfg: &SolverConfig) -> Result<()> {
    if u0.len() != problem.dim_u() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim_u(),
            got: u0.len(),
        });
    }
    if cfg.gradient_source == GradientSource::Analytic && !problem.has_analytic_grad() {
        return Err(Error::InvalidConfig(
            "analytic gradient requested but the problem does not provide one".into(),
        ));
    }
    if cfg.engine == Engine::ProjectedBfgs && problem.u_box.is_none() {
        return Err(Error::InvalidConfig(
            "projected engine needs box constraints on u".into(),
        ));
    }
    if !u0.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFiniteValue { point: u0.to_vec() });
    }
    Ok(())
}

/// Dispatches on the configured engine.
pub fn solve(problem: &Problem, u0: &[f64], cfg: &SolverConfig) -> Result<Solution> {
    match cfg.engine {
        Engine::Newton => newton_solve(problem, u0, cfg),
        Engine::Bfgs | Engine::ProjectedBfgs => bfgs_solve(problem, u0, cfg),
    }
}

fn breakdown_flag(cfg: &SolverConfig, grad_norm: f64, kappa: f64) -> Result<Option<bool>> {
    let Some(bc) = &cfg.breakdown else {
        return Ok(None);
    };
    let inputs = BreakdownInputs {
        grad_norm,
        kappa,
        error_estimate: bc.error_estimate,
        constants: bc.constants.clone(),
    };
    Ok(Some(breakdown_check(&inputs)?))
}

/// The discretised Newton iteration `u <- u - H^-1 G` with quadrature-based
/// gradient and Hessian estimates and a dense LU solve per step.
pub fn newton_solve(problem: &Problem, u0: &[f64], cfg: &SolverConfig) -> Result<Solution> {
    validate(problem, u0, cfg)?;
    let mut driver = Driver::new(problem, cfg);
    let mut trend = cfg
        .trend
        .as_ref()
        .map(|t| TrendMonitor::new(t.probe_epsilon, t.patience));
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut history: Vec<Vec<f64>> = Vec::new();
    let mut u = u0.to_vec();

    let halt = loop {
        let p = records.len();
        let g = driver.gradient(&u)?;
        let grad_norm = norm(&g.gradient);
        let objective = if cfg.record_objective {
            Some(driver.objective(&u)?)
        } else {
            None
        };
        let probe = match (&mut trend, cfg.trend.as_ref()) {
            (Some(_), Some(tc)) => Some(driver.probe(&u, tc.probe_epsilon)?),
            _ => None,
        };
        let mut rec = IterationRecord {
            iter: p,
            u: u.clone(),
            gradient: g.gradient.clone(),
            grad_norm,
            objective: objective.as_ref().map(|e| e.value),
            kappa: None,
            gradient_points: g.points,
            objective_points: objective.as_ref().map_or(0, |e| e.points)
                + probe.as_ref().map_or(0, |e| e.points),
            probe: probe.as_ref().map(|e| e.value),
            breakdown: None,
            tau_proxy: None,
            line_search_fallback: false,
            downsets: cfg.keep_downsets.then(|| g.downsets.clone()),
        };
        history.push(u.clone());

        if let (Some(monitor), Some(e)) = (&mut trend, probe.as_ref()) {
            if let TrendDecision::Stop { at_iteration } = monitor.observe(e.value) {
                records.push(rec);
                break HaltReason::TrendStop {
                    best_iteration: at_iteration,
                };
            }
        }
        if grad_norm <= cfg.grad_tol {
            records.push(rec);
            break HaltReason::GradientTolerance;
        }
        if p >= cfg.max_iters {
            records.push(rec);
            break HaltReason::MaxIterations;
        }

        let hess = driver.hessian(&u)?;
        let sym = &hess.matrix;
        let kappa = condition_number(sym);
        rec.kappa = Some(kappa);
        rec.gradient_points += hess.points;
        rec.breakdown = breakdown_flag(cfg, grad_norm, kappa)?;
        if cfg.tau_diagnostic {
            rec.tau_proxy = tau_proxy(&mut driver, &u, sym)?;
        }
        if rec.breakdown == Some(true) && cfg.breakdown.as_ref().is_some_and(|b| b.halt) {
            records.push(rec);
            break HaltReason::Breakdown;
        }
        if !kappa.is_finite() || kappa > SINGULAR_KAPPA {
            records.push(rec);
            break HaltReason::SingularHessian;
        }
        let rhs = -DVector::from_column_slice(&g.gradient);
        let Some(step) = sym.clone().lu().solve(&rhs) else {
            records.push(rec);
            break HaltReason::SingularHessian;
        };
        records.push(rec);
        let step_norm = step.norm();
        if step_norm < MIN_STEP_NORM {
            break HaltReason::NoProgress;
        }
        for (x, dz) in u.iter_mut().zip(step.iter()) {
            *x += dz;
        }
    };

    finish(records, history, halt)
}

/// `||A^-1 H_fine - I||` with a Hessian re-estimated at a tighter threshold;
/// a heuristic stand-in for the unobservable Jacobian-accuracy term.
fn tau_proxy(driver: &mut Driver, u: &[f64], a: &DMatrix<f64>) -> Result<Option<f64>> {
    let QuadSpec::Adaptive(base) = &driver.cfg.gradient_quad else {
        return Ok(None);
    };
    let mut fine = base.clone();
    fine.epsilon = base.epsilon / 10.0;
    let fine_cfg = SolverConfig {
        gradient_quad: QuadSpec::Adaptive(fine),
        per_component: Vec::new(),
        ..driver.cfg.clone()
    };
    let mut fine_driver = Driver::new(driver.problem, &fine_cfg);
    let h_fine = fine_driver.hessian(u)?;
    let Some(a_inv) = a.clone().try_inverse() else {
        return Ok(None);
    };
    let n = a.nrows();
    let dev = a_inv * h_fine.matrix - DMatrix::identity(n, n);
    Ok(Some(dev.norm()))
}

/// The discretised BFGS iteration with inverse-Hessian updates and a line
/// search on the estimated objective. With `Engine::ProjectedBfgs`, iterates
/// are clamped to the u-box and convergence is measured by the projected
/// gradient.
pub fn bfgs_solve(problem: &Problem, u0: &[f64], cfg: &SolverConfig) -> Result<Solution> {
    validate(problem, u0, cfg)?;
    let n = u0.len();
    let boxed = matches!(cfg.engine, Engine::ProjectedBfgs);
    let bounds = problem.u_box.clone();
    let project = |u: &[f64]| -> Vec<f64> {
        match (&bounds, boxed) {
            (Some(b), true) => projected_step(u, b),
            _ => u.to_vec(),
        }
    };
    let crit_norm = |u: &[f64], g: &[f64]| -> f64 {
        match (&bounds, boxed) {
            (Some(b), true) => {
                let moved: Vec<f64> = u.iter().zip(g).map(|(&x, &gq)| x - gq).collect();
                let proj = projected_step(&moved, b);
                norm(&proj
                    .iter()
                    .zip(u)
                    .map(|(&pq, &x)| x - pq)
                    .collect::<Vec<_>>())
            }
            _ => norm(g),
        }
    };

    let mut driver = Driver::new(problem, cfg);
    let mut trend = cfg
        .trend
        .as_ref()
        .map(|t| TrendMonitor::new(t.probe_epsilon, t.patience));
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut history: Vec<Vec<f64>> = Vec::new();

    let mut u = project(u0);
    let mut g = driver.gradient(&u)?;
    let mut f = driver.objective(&u)?;
    let mut h_inv = DMatrix::identity(n, n);

    // record the starting point
    let probe0 = match cfg.trend.as_ref() {
        Some(tc) => Some(driver.probe(&u, tc.probe_epsilon)?),
        None => None,
    };
    records.push(IterationRecord {
        iter: 0,
        u: u.clone(),
        gradient: g.gradient.clone(),
        grad_norm: crit_norm(&u, &g.gradient),
        objective: Some(f.value),
        kappa: Some(1.0),
        gradient_points: g.points,
        objective_points: f.points + probe0.as_ref().map_or(0, |e| e.points),
        probe: probe0.as_ref().map(|e| e.value),
        breakdown: breakdown_flag(cfg, crit_norm(&u, &g.gradient), 1.0)?,
        tau_proxy: None,
        line_search_fallback: false,
        downsets: cfg.keep_downsets.then(|| g.downsets.clone()),
    });
    history.push(u.clone());
    if let (Some(monitor), Some(e)) = (&mut trend, probe0.as_ref()) {
        if let TrendDecision::Stop { at_iteration } = monitor.observe(e.value) {
            return finish(records, history, HaltReason::TrendStop {
                best_iteration: at_iteration,
            });
        }
    }

    let halt = loop {
        let p = records.len();
        if records.last().expect("nonempty").grad_norm <= cfg.grad_tol {
            break HaltReason::GradientTolerance;
        }
        if p > cfg.max_iters {
            break HaltReason::MaxIterations;
        }

        let gv = DVector::from_column_slice(&g.gradient);
        let mut v = -(&h_inv * &gv);
        let mut dphi0 = gv.dot(&v);
        if dphi0 >= 0.0 {
            // stale curvature; restart from steepest descent
            h_inv = DMatrix::identity(n, n);
            v = -gv.clone();
            dphi0 = -gv.dot(&gv);
        }
        let kappa = condition_number(&h_inv);

        // line search bookkeeping: points spent on trial evaluations
        let ls_obj_points = std::cell::Cell::new(0usize);
        let ls_grad_points = std::cell::Cell::new(0usize);
        let mut fallback = false;
        let outcome = {
            let shared = std::cell::RefCell::new(&mut driver);
            let vs = v.as_slice();
            let mut phi = |alpha: f64| -> Result<f64> {
                let trial: Vec<f64> = u.iter().zip(vs).map(|(&x, &d)| x + alpha * d).collect();
                let est = shared.borrow_mut().objective(&project(&trial))?;
                ls_obj_points.set(ls_obj_points.get() + est.points);
                Ok(est.value)
            };
            let search = match (cfg.line_search, boxed) {
                // a projected path has kinks; curvature conditions are not
                // meaningful along it
                (LineSearch::StrongWolfe { c1, .. }, true) => LineSearch::Backtracking
                    .pinned(c1),
                (ls, _) => ls.pinned(1e-4),
            };
            match search {
                PinnedSearch::StrongWolfe { c1, c2 } => {
                    let mut dphi = |alpha: f64| -> Result<f64> {
                        let trial: Vec<f64> =
                            u.iter().zip(vs).map(|(&x, &d)| x + alpha * d).collect();
                        let est = shared.borrow_mut().gradient(&trial)?;
                        ls_grad_points.set(ls_grad_points.get() + est.points);
                        Ok(DVector::from_column_slice(&est.gradient).dot(&v))
                    };
                    match strong_wolfe(f.value, dphi0, &mut phi, &mut dphi, c1, c2) {
                        Ok(o) => o,
                        Err(Error::LineSearchFailed { .. }) => {
                            fallback = true;
                            backtracking(f.value, dphi0, &mut phi, c1)?
                        }
                        Err(e) => return Err(e),
                    }
                }
                PinnedSearch::Backtracking { c1 } => backtracking(f.value, dphi0, &mut phi, c1)?,
                PinnedSearch::ExactQuadratic => exact_quadratic(f.value, dphi0, &mut phi)?,
            }
        };
        fallback |= outcome.fallback;
        let (ls_obj_points, ls_grad_points) = (ls_obj_points.get(), ls_grad_points.get());

        let u_next = project(
            &u.iter()
                .zip(v.as_slice())
                .map(|(&x, &d)| x + outcome.alpha * d)
                .collect::<Vec<_>>(),
        );
        let s: Vec<f64> = u_next.iter().zip(&u).map(|(a, b)| a - b).collect();
        let g_next = driver.gradient(&u_next)?;
        let f_next = driver.objective(&u_next)?;
        let probe = match cfg.trend.as_ref() {
            Some(tc) => Some(driver.probe(&u_next, tc.probe_epsilon)?),
            None => None,
        };
        let crit = crit_norm(&u_next, &g_next.gradient);
        records.push(IterationRecord {
            iter: p,
            u: u_next.clone(),
            gradient: g_next.gradient.clone(),
            grad_norm: crit,
            objective: Some(f_next.value),
            kappa: Some(kappa),
            gradient_points: g_next.points + ls_grad_points,
            objective_points: f_next.points
                + ls_obj_points
                + probe.as_ref().map_or(0, |e| e.points),
            probe: probe.as_ref().map(|e| e.value),
            breakdown: breakdown_flag(cfg, crit, kappa)?,
            tau_proxy: None,
            line_search_fallback: fallback,
            downsets: cfg.keep_downsets.then(|| g_next.downsets.clone()),
        });
        history.push(u_next.clone());

        if let (Some(monitor), Some(e)) = (&mut trend, probe.as_ref()) {
            if let TrendDecision::Stop { at_iteration } = monitor.observe(e.value) {
                break HaltReason::TrendStop {
                    best_iteration: at_iteration,
                };
            }
        }

        // curvature update; skipped when s^T y is not safely positive
        let sv = DVector::from_column_slice(&s);
        let yv = DVector::from_column_slice(
            &g_next
                .gradient
                .iter()
                .zip(&g.gradient)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );
        let sty = sv.dot(&yv);
        if sty > CURVATURE_SKIP * sv.norm() * yv.norm() {
            h_inv = bfgs_update(&h_inv, &sv, &yv);
        }

        let step_norm = norm(&s);
        if step_norm < MIN_STEP_NORM && crit > cfg.grad_tol {
            break HaltReason::NoProgress;
        }
        u = u_next;
        g = g_next;
        f = f_next;
    };

    finish(records, history, halt)
}

/// Internal, resolved line-search choice.
enum PinnedSearch {
    StrongWolfe { c1: f64, c2: f64 },
    Backtracking { c1: f64 },
    ExactQuadratic,
}

impl LineSearch {
    fn pinned(self, default_c1: f64) -> PinnedSearch {
        match self {
            LineSearch::StrongWolfe { c1, c2 } => PinnedSearch::StrongWolfe { c1, c2 },
            LineSearch::Backtracking => PinnedSearch::Backtracking { c1: default_c1 },
            LineSearch::ExactQuadratic => PinnedSearch::ExactQuadratic,
        }
    }
}

fn finish(
    records: Vec<IterationRecord>,
    history: Vec<Vec<f64>>,
    halt: HaltReason,
) -> Result<Solution> {
    let pick = match halt {
        HaltReason::TrendStop { best_iteration } => best_iteration,
        _ => records.len() - 1,
    };
    let u = history[pick].clone();
    let objective = records[pick].objective.unwrap_or(f64::NAN);
    Ok(Solution {
        u,
        objective,
        trace: SolverTrace { records, halt },
    })
}

/// A frozen surrogate `S(u) = sum_j lambda_j h(u, w_j)`: one fixed point set
/// with weights, used by the "discretise then optimise" baseline.
#[derive(Debug, Clone)]
pub struct FixedSurrogate {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub label: String,
}

impl FixedSurrogate {
    /// A single-scenario surrogate.
    pub fn single_point(w: Vec<f64>) -> Self {
        Self {
            points: vec![w],
            weights: vec![1.0],
            label: "single-point".into(),
        }
    }

    /// One Monte Carlo draw from the problem density, frozen for the whole
    /// solve; objective and gradient share the same points by construction.
    pub fn monte_carlo(problem: &Problem, n: usize, seed: u64) -> Self {
        let points = mc::sample_points(problem, n, seed, 0);
        Self {
            points,
            weights: vec![1.0 / n as f64; n],
            label: format!("mc-{n}"),
        }
    }

    /// The classical sparse grid of the given level, with density and domain
    /// Jacobian folded into the weights.
    pub fn sparse_grid(problem: &Problem, family: RuleFamily, level: u32) -> Result<Self> {
        let set = classical_sparse_downset(level, problem.dim_w());
        Self::from_downset(problem, family, &set)
    }

    /// Any downset collapsed to combined weights on the domain.
    pub fn from_downset(problem: &Problem, family: RuleFamily, set: &Downset) -> Result<Self> {
        let grid = downset_point_set(family, set)?;
        let mut points = Vec::with_capacity(grid.len());
        let mut weights = Vec::with_capacity(grid.len());
        for (x, w) in grid.points.iter().zip(&grid.weights) {
            let (dom, jac) = problem.map_to_reference(x);
            let lambda = w * problem.density.density(&dom) * jac;
            points.push(dom);
            weights.push(lambda);
        }
        Ok(Self {
            points,
            weights,
            label: format!("{}-downset-{}", family.tag(), set.len()),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn evaluate(&self, problem: &Problem, u: &[f64]) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(w, &lambda)| lambda * problem.cost(u, w))
            .sum()
    }
}

/// "Discretise then optimise": minimizes the fixed surrogate `S(u)` with
/// BFGS. `S` is a deterministic function, so its gradient is taken by plain
/// central differences on `S` itself.
pub fn dtom_surrogate_solve(
    problem: &Problem,
    u0: &[f64],
    surrogate: &FixedSurrogate,
    grad_tol: f64,
    max_iters: usize,
) -> Result<Solution> {
    if u0.len() != problem.dim_u() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim_u(),
            got: u0.len(),
        });
    }
    let n = u0.len();
    let cost = surrogate.len();
    let s_of = |u: &[f64]| surrogate.evaluate(problem, u);
    let grad_of = |u: &[f64]| -> Vec<f64> {
        let base = f64::EPSILON.cbrt();
        (0..n)
            .map(|q| {
                let h = base * u[q].abs().max(1.0);
                let mut up = u.to_vec();
                up[q] += h;
                let mut dn = u.to_vec();
                dn[q] -= h;
                (s_of(&up) - s_of(&dn)) / (2.0 * h)
            })
            .collect()
    };

    let mut records = Vec::new();
    let mut history = Vec::new();
    let mut u = u0.to_vec();
    let mut g = grad_of(&u);
    let mut f = s_of(&u);
    let mut h_inv = DMatrix::identity(n, n);
    records.push(IterationRecord {
        iter: 0,
        u: u.clone(),
        gradient: g.clone(),
        grad_norm: norm(&g),
        objective: Some(f),
        kappa: Some(1.0),
        gradient_points: 2 * n * cost,
        objective_points: cost,
        probe: None,
        breakdown: None,
        tau_proxy: None,
        line_search_fallback: false,
        downsets: None,
    });
    history.push(u.clone());

    let halt = loop {
        let p = records.len();
        if norm(&g) <= grad_tol {
            break HaltReason::GradientTolerance;
        }
        if p > max_iters {
            break HaltReason::MaxIterations;
        }
        let gv = DVector::from_column_slice(&g);
        let mut v = -(&h_inv * &gv);
        let mut dphi0 = gv.dot(&v);
        if dphi0 >= 0.0 {
            h_inv = DMatrix::identity(n, n);
            v = -gv.clone();
            dphi0 = -gv.dot(&gv);
        }
        let kappa = condition_number(&h_inv);
        let evals = std::cell::Cell::new(0usize);
        let outcome = {
            let mut phi = |alpha: f64| -> Result<f64> {
                evals.set(evals.get() + 1);
                Ok(s_of(
                    &u.iter()
                        .zip(v.as_slice())
                        .map(|(&x, &d)| x + alpha * d)
                        .collect::<Vec<_>>(),
                ))
            };
            let mut dphi = |alpha: f64| -> Result<f64> {
                evals.set(evals.get() + 2 * n);
                let trial: Vec<f64> = u
                    .iter()
                    .zip(v.as_slice())
                    .map(|(&x, &d)| x + alpha * d)
                    .collect();
                Ok(DVector::from_column_slice(&grad_of(&trial)).dot(&v))
            };
            match strong_wolfe(f, dphi0, &mut phi, &mut dphi, 1e-4, 0.9) {
                Ok(o) => o,
                Err(Error::LineSearchFailed { .. }) => backtracking(f, dphi0, &mut phi, 1e-4)?,
                Err(e) => return Err(e),
            }
        };
        let evals = evals.get();
        let u_next: Vec<f64> = u
            .iter()
            .zip(v.as_slice())
            .map(|(&x, &d)| x + outcome.alpha * d)
            .collect();
        let g_next = grad_of(&u_next);
        let f_next = s_of(&u_next);
        let s: Vec<f64> = u_next.iter().zip(&u).map(|(a, b)| a - b).collect();
        records.push(IterationRecord {
            iter: p,
            u: u_next.clone(),
            gradient: g_next.clone(),
            grad_norm: norm(&g_next),
            objective: Some(f_next),
            kappa: Some(kappa),
            gradient_points: 2 * n * cost,
            objective_points: cost * (1 + evals),
            probe: None,
            breakdown: None,
            tau_proxy: None,
            line_search_fallback: false,
            downsets: None,
        });
        history.push(u_next.clone());
        let sv = DVector::from_column_slice(&s);
        let yv = DVector::from_column_slice(
            &g_next.iter().zip(&g).map(|(a, b)| a - b).collect::<Vec<_>>(),
        );
        let sty = sv.dot(&yv);
        if sty > CURVATURE_SKIP * sv.norm() * yv.norm() {
            h_inv = bfgs_update(&h_inv, &sv, &yv);
        }
        if norm(&s) < MIN_STEP_NORM && norm(&g_next) > grad_tol {
            break HaltReason::NoProgress;
        }
        u = u_next;
        g = g_next;
        f = f_next;
    };
    finish(records, history, halt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptive::AdaptiveConfig;
    use crate::problems::{additive_problem, toy_problem, Marginal, ProductDensity};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn tight_gp(d: usize, cap: u32) -> QuadSpec {
        QuadSpec::Adaptive(AdaptiveConfig::isotropic(
            RuleFamily::GaussPatterson,
            1e-10,
            d,
            cap,
        ))
    }

    #[test]
    fn projected_step_examples() {
        let b = [(0.0, 1.0), (0.0, 1.0)];
        assert_eq!(projected_step(&[1.2, 0.5], &b), vec![1.0, 0.5]);
        assert_eq!(projected_step(&[0.4, 0.9], &b), vec![0.4, 0.9]);
        assert_eq!(projected_step(&[-3.0, -0.1], &b), vec![0.0, 0.0]);
    }

    #[test]
    fn bfgs_update_preserves_positive_definiteness() {
        let mut state = 0x1234_5678_9abc_def0u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let n = 4;
        let mut h = DMatrix::<f64>::identity(n, n);
        let mut accepted = 0;
        while accepted < 25 {
            let s = DVector::from_fn(n, |_, _| next());
            let y = DVector::from_fn(n, |_, _| next());
            if s.dot(&y) <= 1e-10 * s.norm() * y.norm() {
                continue;
            }
            h = bfgs_update(&h, &s, &y);
            let eig = h.clone().symmetric_eigen().eigenvalues;
            assert!(
                eig.iter().all(|&l| l > 0.0),
                "lost positive definiteness: {eig:?}"
            );
            accepted += 1;
        }
    }

    #[test]
    fn newton_solves_the_toy_problem_in_two_iterations() {
        let p = toy_problem();
        let mut cfg = SolverConfig::new(Engine::Newton, tight_gp(2, 6));
        cfg.gradient_source = GradientSource::Analytic;
        cfg.grad_tol = 1e-10;
        let sol = newton_solve(&p, &[0.0], &cfg).unwrap();
        assert_abs_diff_eq!(sol.u[0], -1.5, epsilon = 1e-9);
        assert!(sol.trace.iterations() <= 2);
        assert_eq!(sol.trace.halt, HaltReason::GradientTolerance);
    }

    #[test]
    fn newton_handles_deterministic_costs_in_one_step() {
        let p = crate::problems::Problem::new(
            "sumsq",
            ProductDensity::iid(Marginal::Uniform { lo: 0.0, hi: 1.0 }, 2),
            2,
            Arc::new(|u: &[f64], _w: &[f64]| u.iter().map(|x| x * x).sum()),
        )
        .unwrap();
        let mut cfg = SolverConfig::new(Engine::Newton, tight_gp(2, 5));
        cfg.grad_tol = 1e-7;
        let sol = newton_solve(&p, &[3.0, -2.0], &cfg).unwrap();
        assert!(norm(&sol.u) < 1e-6, "{:?}", sol.u);
        assert!(sol.trace.iterations() <= 2);
    }

    #[test]
    fn bfgs_matches_newton_on_the_toy_quadratic() {
        let p = toy_problem();
        let mut cfg = SolverConfig::new(Engine::Bfgs, tight_gp(2, 6));
        cfg.gradient_source = GradientSource::Analytic;
        cfg.grad_tol = 1e-10;
        cfg.line_search = LineSearch::ExactQuadratic;
        let sol = bfgs_solve(&p, &[0.0], &cfg).unwrap();
        assert_abs_diff_eq!(sol.u[0], -1.5, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.objective, -2.25, epsilon = 1e-9);
    }

    #[test]
    fn objective_is_nonincreasing_under_accurate_quadrature() {
        let p = toy_problem();
        let mut cfg = SolverConfig::new(Engine::Bfgs, tight_gp(2, 6));
        cfg.gradient_source = GradientSource::Analytic;
        cfg.grad_tol = 1e-9;
        let sol = bfgs_solve(&p, &[2.0], &cfg).unwrap();
        let objs: Vec<f64> = sol.trace.records.iter().filter_map(|r| r.objective).collect();
        for w in objs.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "objective rose: {objs:?}");
        }
    }

    #[test]
    fn projected_bfgs_drives_the_additive_problem_onto_the_boundary() {
        let d = 6;
        let p = additive_problem(d);
        let mut cfg = SolverConfig::new(
            Engine::ProjectedBfgs,
            QuadSpec::MonteCarlo {
                samples: 10,
                seed: 17,
                frozen: false,
            },
        );
        cfg.objective_quad = Some(tight_gp(d, 5));
        cfg.gradient_source = GradientSource::Analytic;
        cfg.grad_tol = 1e-12;
        cfg.max_iters = 60;
        let sol = bfgs_solve(&p, &vec![0.5; d], &cfg).unwrap();
        for x in &sol.u {
            assert_abs_diff_eq!(*x, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn trace_length_counts_iterations_plus_one() {
        let p = toy_problem();
        let mut cfg = SolverConfig::new(Engine::Bfgs, tight_gp(2, 5));
        cfg.gradient_source = GradientSource::Analytic;
        cfg.max_iters = 1;
        cfg.grad_tol = 1e-16; // force the iteration cap
        let sol = bfgs_solve(&p, &[1.0], &cfg).unwrap();
        assert_eq!(sol.trace.records.len(), sol.trace.iterations() + 1);
        assert_eq!(sol.trace.iterations(), 1);
        assert_eq!(sol.trace.halt, HaltReason::MaxIterations);
    }

    #[test]
    fn trace_serializes_to_json_lines_and_csv() {
        let p = toy_problem();
        let mut cfg = SolverConfig::new(Engine::Bfgs, tight_gp(2, 4));
        cfg.gradient_source = GradientSource::Analytic;
        cfg.keep_downsets = true;
        cfg.max_iters = 2;
        cfg.grad_tol = 1e-16;
        let sol = bfgs_solve(&p, &[1.0], &cfg).unwrap();
        let mut json = Vec::new();
        sol.trace.write_json_lines(&mut json).unwrap();
        let text = String::from_utf8(json).unwrap();
        assert_eq!(text.lines().count(), sol.trace.records.len());
        assert!(text.contains("\"grad_norm\""));
        let mut csv = Vec::new();
        sol.trace.write_summary_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("iter,grad_norm,objective,points,kappa\n"));
    }

    #[test]
    fn dtom_single_point_surrogate_has_the_closed_form_minimizer() {
        let p = toy_problem();
        let w0 = vec![0.3, 0.6];
        let sur = FixedSurrogate::single_point(w0.clone());
        let sol = dtom_surrogate_solve(&p, &[0.0], &sur, 1e-12, 50).unwrap();
        let expect = -(w0[0] * w0[0] + 10.0 * w0[1] * w0[1]) / 2.0;
        assert_abs_diff_eq!(sol.u[0], expect, epsilon = 1e-9);
    }

    #[test]
    fn dtom_monte_carlo_surrogate_minimizes_the_sample_average() {
        let p = toy_problem();
        let sur = FixedSurrogate::monte_carlo(&p, 100, 5);
        let mean: f64 = sur
            .points
            .iter()
            .map(|w| w[0] * w[0] + 10.0 * w[1] * w[1])
            .sum::<f64>()
            / 100.0;
        let sol = dtom_surrogate_solve(&p, &[0.0], &sur, 1e-12, 50).unwrap();
        assert_abs_diff_eq!(sol.u[0], -mean / 2.0, epsilon = 1e-8);
    }

    #[test]
    fn dtom_full_box_sparse_surrogate_recovers_the_true_minimizer() {
        let p = toy_problem();
        let set = Downset::full_box(&crate::grid_index::MultiIndex::uniform(2, 4));
        let sur = FixedSurrogate::from_downset(&p, RuleFamily::GaussPatterson, &set).unwrap();
        let sol = dtom_surrogate_solve(&p, &[0.0], &sur, 1e-12, 50).unwrap();
        assert_abs_diff_eq!(sol.u[0], -1.5, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.objective, -2.25, epsilon = 1e-10);
    }

    #[test]
    fn analytic_gradient_requires_problem_support() {
        let p = crate::problems::Problem::new(
            "nogruserad",
            ProductDensity::iid(Marginal::Uniform { lo: 0.0, hi: 1.0 }, 1),
            1,
            Arc::new(|u: &[f64], _w: &[f64]| u[0] * u[0]),
        )
        .unwrap();
        let mut cfg = SolverConfig::new(Engine::Bfgs, tight_gp(1, 3));
        cfg.gradient_source = GradientSource::Analytic;
        assert!(matches!(
            bfgs_solve(&p, &[1.0], &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }
}
