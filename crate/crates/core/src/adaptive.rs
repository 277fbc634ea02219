//! Dimension-adaptive sparse grid quadrature and its error bounds.
//!
//! The adaptive rule grows a downset greedily: starting from the root index,
//! the covering element with the largest surplus magnitude is accepted until
//! no covering element within the level cap reaches the threshold epsilon.
//! The run is fully deterministic: candidates with equal surplus magnitude
//! are broken lexicographically, and every accepted surplus is recorded.

use crate::error::{Error, Result};
use crate::grid_index::{Downset, MultiIndex};
use crate::pairwise_sum;
use crate::rules1d::RuleFamily;
use crate::sg_quadrature::{QuadResult, TensorEngine};
use crate::DEFAULT_MAX_EVALUATIONS;
use serde::Serialize;
use std::collections::BTreeMap;

/// Configuration of an adaptive quadrature run.
#[derive(Debug, Clone)]
pub struct AdaptiveConfig {
    /// Surplus threshold: refinement stops when no covering element has
    /// `|Delta_i f| >= epsilon`.
    pub epsilon: f64,
    /// Componentwise level cap, guarding against runaway refinement of a
    /// single dimension.
    pub cap: MultiIndex,
    pub family: RuleFamily,
    pub max_evaluations: usize,
}

impl AdaptiveConfig {
    pub fn new(family: RuleFamily, epsilon: f64, cap: MultiIndex) -> Self {
        assert!(epsilon > 0.0, "epsilon must be positive");
        Self {
            epsilon,
            cap,
            family,
            max_evaluations: DEFAULT_MAX_EVALUATIONS,
        }
    }

    /// Isotropic cap `(level, ..., level)` in `d` dimensions.
    pub fn isotropic(family: RuleFamily, epsilon: f64, d: usize, cap_level: u32) -> Self {
        Self::new(family, epsilon, MultiIndex::uniform(d, cap_level))
    }
}

/// One accepted refinement step, exported in the run trace.
#[derive(Debug, Clone, Serialize)]
pub struct AdaptiveStep {
    pub index: MultiIndex,
    pub surplus: f64,
    pub cumulative_value: f64,
    pub cumulative_points: usize,
}

/// Runs the dimension-adaptive quadrature for `f` on `[-1, 1]^d`.
///
/// The returned downset contains the root index plus exactly those indices
/// whose surplus reached `epsilon` at selection time; on exit no covering
/// element within the cap reaches the threshold. If the evaluation budget is
/// hit, the partial result is returned with `truncated` set.
pub fn adaptive_quadrature(cfg: &AdaptiveConfig, f: impl Fn(&[f64]) -> f64) -> Result<QuadResult> {
    adaptive_quadrature_traced(cfg, f).map(|(result, _)| result)
}

/// As [`adaptive_quadrature`], additionally returning the ordered list of
/// accepted refinement steps.
pub fn adaptive_quadrature_traced(
    cfg: &AdaptiveConfig,
    f: impl Fn(&[f64]) -> f64,
) -> Result<(QuadResult, Vec<AdaptiveStep>)> {
    let f_obj: &dyn Fn(&[f64]) -> f64 = &f;
    let mut engine = TensorEngine::new(cfg.family, f_obj, cfg.max_evaluations);
    let mut set = Downset::root(cfg.cap.clone());
    let root = MultiIndex::ones(cfg.cap.dim());

    let mut log = BTreeMap::new();
    let mut accepted = Vec::new();
    let mut steps = Vec::new();
    let mut truncated = false;

    // The root surplus is always part of the sum, regardless of epsilon.
    let root_surplus = engine.surplus_value(&root)?;
    log.insert(root.clone(), root_surplus);
    accepted.push(root_surplus);
    steps.push(AdaptiveStep {
        index: root.clone(),
        surplus: root_surplus,
        cumulative_value: root_surplus,
        cumulative_points: engine.points_used(),
    });

    // Frontier of covering elements with their (cached) surplus values.
    let mut frontier: BTreeMap<MultiIndex, f64> = BTreeMap::new();
    truncated |= grow_frontier(&mut frontier, &set, &mut engine, &root)?;
    while !truncated {
        // largest |surplus|; ties resolved toward the lexicographically
        // smallest index by the ascending map iteration
        let Some((best, surplus)) = frontier
            .iter()
            .fold(None::<(&MultiIndex, f64)>, |acc, (idx, &v)| match acc {
                Some((_, best_v)) if v.abs() <= best_v.abs() => acc,
                _ => Some((idx, v)),
            })
            .map(|(idx, v)| (idx.clone(), v))
        else {
            break; // cap saturated
        };
        if surplus.abs() < cfg.epsilon {
            break; // no remaining covering element reaches the threshold
        }
        frontier.remove(&best);
        set.insert(best.clone())?;
        log.insert(best.clone(), surplus);
        accepted.push(surplus);
        steps.push(AdaptiveStep {
            index: best.clone(),
            surplus,
            cumulative_value: pairwise_sum(&accepted),
            cumulative_points: engine.points_used(),
        });
        truncated |= grow_frontier(&mut frontier, &set, &mut engine, &best)?;
    }

    let result = QuadResult {
        value: pairwise_sum(&accepted),
        point_count: engine.points_used(),
        downset: Some(set),
        surplus_log: log,
        truncated,
    };
    Ok((result, steps))
}

/// Evaluates the surpluses of every covering element that insertion of
/// `from` made admissible and adds them to the frontier. Returns true when
/// the evaluation budget ran out on the way.
fn grow_frontier(
    frontier: &mut BTreeMap<MultiIndex, f64>,
    set: &Downset,
    engine: &mut TensorEngine<'_>,
    from: &MultiIndex,
) -> Result<bool> {
    for k in 0..set.dim() {
        let cand = from.bumped(k);
        if frontier.contains_key(&cand) || !set.is_covering_element(&cand)? {
            continue;
        }
        match engine.surplus_value(&cand) {
            Ok(v) => {
                frontier.insert(cand, v);
            }
            Err(Error::BudgetExceeded { .. }) => return Ok(true),
            Err(other) => return Err(other),
        }
    }
    Ok(false)
}

/// Smoothness parameters for the surplus-decay error bounds.
///
/// `gamma_r` is the constant of the 1D quadrature error bound
/// `||I - Q_i|| <= gamma_r 2^{-r i}`; it comes from Peano-kernel bounds of
/// the underlying rule and is supplied by the caller.
#[derive(Debug, Clone, Copy)]
pub struct ErrorBoundParams {
    pub r: u32,
    pub gamma_r: f64,
    pub f_norm: f64,
}

impl Default for ErrorBoundParams {
    fn default() -> Self {
        Self {
            r: 2,
            gamma_r: 1.0,
            f_norm: 1.0,
        }
    }
}

/// The a-priori and a-posteriori threshold bounds on `|Q_L f - Q_I f|`:
/// `|L| epsilon` before the run and `(|L| - |I|) epsilon` after it.
pub fn priori_bound(card_l: u64, card_i: u64, epsilon: f64) -> (f64, f64) {
    assert!(card_i <= card_l, "downset cannot exceed the full box");
    let priori = card_l as f64 * epsilon;
    let posteriori = (card_l - card_i) as f64 * epsilon;
    (priori, posteriori)
}

/// Smoothness-based bound: `gamma_r^d (1 + 2^r)^d ||f|| sum_{i in L\I} 2^{-r |i|_1}`.
pub fn smoothness_bound(
    l_set: &Downset,
    i_set: &Downset,
    params: &ErrorBoundParams,
) -> Result<f64> {
    if l_set.dim() != i_set.dim() {
        return Err(Error::DimensionMismatch {
            expected: l_set.dim(),
            got: i_set.dim(),
        });
    }
    let d = l_set.dim() as i32;
    let c = (params.gamma_r * (1.0 + 2.0f64.powi(params.r as i32))).powi(d) * params.f_norm;
    let tail: f64 = l_set
        .difference(i_set)
        .map(|i| 2.0f64.powi(-((params.r * i.level_sum()) as i32)))
        .sum();
    Ok(c * tail)
}

/// Result of the rho-form posterior bound.
#[derive(Debug, Clone, Copy)]
pub struct RhoBound {
    pub bound: f64,
    /// Smallest admissible rho; at `rho = rho_min` the bound coincides with
    /// the plain a-posteriori bound `(|L| - |I|) epsilon`.
    pub rho_min: f64,
}

/// Posterior bound `(epsilon / rho) sum_{i in L\I} 2^{r (|m| - |i|)}` where
/// `m` minimizes `|i|_1` over `L \ I`. An empty difference set yields a zero
/// bound.
pub fn rho_bound(
    l_set: &Downset,
    i_set: &Downset,
    epsilon: f64,
    r: u32,
    rho: f64,
) -> Result<RhoBound> {
    if l_set.dim() != i_set.dim() {
        return Err(Error::DimensionMismatch {
            expected: l_set.dim(),
            got: i_set.dim(),
        });
    }
    let diff: Vec<&MultiIndex> = l_set.difference(i_set).collect();
    if diff.is_empty() {
        return Ok(RhoBound {
            bound: 0.0,
            rho_min: 0.0,
        });
    }
    let m = diff
        .iter()
        .map(|i| i.level_sum())
        .min()
        .expect("nonempty difference");
    let sum: f64 = diff
        .iter()
        .map(|i| 2.0f64.powi((r as i32) * (m as i32 - i.level_sum() as i32)))
        .sum();
    let rho_min = sum / diff.len() as f64;
    Ok(RhoBound {
        bound: epsilon / rho * sum,
        rho_min,
    })
}

/// All four bounds of one adaptive run against the full box of its cap.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundBundle {
    pub priori: f64,
    pub posteriori: f64,
    pub smoothness: f64,
    pub rho_form: f64,
}

impl BoundBundle {
    /// Assembles the bundle for the computed downset `i_set` against the
    /// explicit full box `l_set`. `rho` defaults to `rho_min` when not given.
    pub fn compute(
        l_set: &Downset,
        i_set: &Downset,
        epsilon: f64,
        params: &ErrorBoundParams,
        rho: Option<f64>,
    ) -> Result<Self> {
        let (priori, posteriori) = priori_bound(l_set.len() as u64, i_set.len() as u64, epsilon);
        let smoothness = smoothness_bound(l_set, i_set, params)?;
        let rb = rho_bound(l_set, i_set, epsilon, params.r, 1.0)?;
        let rho = rho.unwrap_or(rb.rho_min);
        let rho_form = if rho > 0.0 {
            rb.bound / rho
        } else {
            0.0
        };
        Ok(Self {
            priori,
            posteriori,
            smoothness,
            rho_form,
        })
    }
}
