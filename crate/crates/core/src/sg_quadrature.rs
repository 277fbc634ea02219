//! Non-adaptive multidimensional quadrature on `[-1, 1]^d`: tensor-product
//! surpluses, product rules, classical level-l sparse grids, and generalized
//! sparse grids over an arbitrary downset.

use crate::error::{Error, Result};
use crate::grid_index::{Downset, MultiIndex};
use crate::pairwise_sum;
use crate::rules1d::{self, RuleFamily, SurplusRule1D};
use std::collections::{BTreeMap, HashMap};
use std::io::Write;

/// A flat list of d-dimensional nodes with (possibly negative) combined
/// weights. Duplicate nodes are merged with summed weights.
#[derive(Debug, Clone)]
pub struct GridPointSet {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub source: String,
}

impl GridPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    /// CSV export: `x_1,...,x_d,weight`, one row per node.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let d = self.points.first().map_or(0, |p| p.len());
        let header: Vec<String> = (1..=d).map(|k| format!("x_{k}")).collect();
        writeln!(out, "{},weight", header.join(","))?;
        for (p, w) in self.points.iter().zip(&self.weights) {
            let coords: Vec<String> = p.iter().map(|x| format!("{x:.17e}")).collect();
            writeln!(out, "{},{w:.17e}", coords.join(","))?;
        }
        Ok(())
    }
}

/// Outcome of a multidimensional quadrature.
#[derive(Debug, Clone)]
pub struct QuadResult {
    pub value: f64,
    /// Distinct integrand evaluation points used.
    pub point_count: usize,
    pub downset: Option<Downset>,
    /// Per-index surplus values `Delta_i f` when a downset drove the rule.
    pub surplus_log: BTreeMap<MultiIndex, f64>,
    /// Set when an evaluation budget cut the computation short.
    pub truncated: bool,
}

impl QuadResult {
    fn plain(value: f64, point_count: usize) -> Self {
        Self {
            value,
            point_count,
            downset: None,
            surplus_log: BTreeMap::new(),
            truncated: false,
        }
    }
}

/// Shared evaluation state for tensor surpluses: per-level surplus rules and
/// a function-value cache keyed by exact node coordinates, so nested nodes
/// are evaluated once per quadrature call.
pub(crate) struct TensorEngine<'f> {
    family: RuleFamily,
    f: &'f dyn Fn(&[f64]) -> f64,
    surpluses: Vec<SurplusRule1D>,
    cache: HashMap<Vec<u64>, f64>,
    budget: usize,
}

impl<'f> TensorEngine<'f> {
    pub(crate) fn new(family: RuleFamily, f: &'f dyn Fn(&[f64]) -> f64, budget: usize) -> Self {
        Self {
            family,
            f,
            surpluses: Vec::new(),
            cache: HashMap::new(),
            budget,
        }
    }

    pub(crate) fn points_used(&self) -> usize {
        self.cache.len()
    }

    fn surplus_rule(&mut self, level: u32) -> Result<&SurplusRule1D> {
        while self.surpluses.len() < level as usize {
            let next = rules1d::make_surplus(self.family, self.surpluses.len() as u32 + 1)?;
            self.surpluses.push(next);
        }
        Ok(&self.surpluses[(level - 1) as usize])
    }

    fn eval(&mut self, point: &[f64]) -> Result<f64> {
        let key: Vec<u64> = point.iter().map(|x| x.to_bits()).collect();
        if let Some(&v) = self.cache.get(&key) {
            return Ok(v);
        }
        if self.cache.len() >= self.budget {
            return Err(Error::BudgetExceeded {
                spent: self.cache.len(),
                budget: self.budget,
            });
        }
        let v = (self.f)(point);
        if !v.is_finite() {
            return Err(Error::NonFiniteValue {
                point: point.to_vec(),
            });
        }
        self.cache.insert(key, v);
        Ok(v)
    }

    /// `Delta_{i}(f)`, the tensor product of the 1D difference rules.
    pub(crate) fn surplus_value(&mut self, index: &MultiIndex) -> Result<f64> {
        let d = index.dim();
        for k in 0..d {
            self.surplus_rule(index.level(k))?;
        }
        let per_dim: Vec<(Vec<f64>, Vec<f64>)> = (0..d)
            .map(|k| {
                let s = &self.surpluses[(index.level(k) - 1) as usize];
                (s.nodes.clone(), s.weights.clone())
            })
            .collect();
        let mut terms = Vec::new();
        let mut point = vec![0.0f64; d];
        let mut odo = vec![0usize; d];
        'outer: loop {
            let mut weight = 1.0;
            for k in 0..d {
                point[k] = per_dim[k].0[odo[k]];
                weight *= per_dim[k].1[odo[k]];
            }
            terms.push(weight * self.eval(&point)?);
            let mut k = 0;
            loop {
                if k == d {
                    break 'outer;
                }
                odo[k] += 1;
                if odo[k] < per_dim[k].0.len() {
                    break;
                }
                odo[k] = 0;
                k += 1;
            }
        }
        Ok(pairwise_sum(&terms))
    }
}

/// Evaluates a single tensor surplus `Delta_i(f)` on `[-1, 1]^d`.
pub fn tensor_surplus(
    family: RuleFamily,
    index: &MultiIndex,
    f: impl Fn(&[f64]) -> f64,
) -> Result<f64> {
    let f_obj: &dyn Fn(&[f64]) -> f64 = &f;
    TensorEngine::new(family, f_obj, usize::MAX).surplus_value(index)
}

/// Full tensor-product quadrature with per-dimension levels `cap`.
///
/// This evaluates the product rule directly from the 1D nodes and weights; it
/// serves as the independent route against which the surplus-based downset
/// quadrature is checked.
pub fn product_rule(
    family: RuleFamily,
    cap: &MultiIndex,
    f: impl Fn(&[f64]) -> f64,
    budget: usize,
) -> Result<QuadResult> {
    let d = cap.dim();
    let rules: Vec<_> = (0..d)
        .map(|k| rules1d::make_rule(family, cap.level(k)))
        .collect::<Result<_>>()?;
    let projected: usize = rules
        .iter()
        .try_fold(1usize, |acc, r| acc.checked_mul(r.nodes.len()))
        .unwrap_or(usize::MAX);
    if projected > budget {
        return Err(Error::BudgetExceeded {
            spent: 0,
            budget,
        });
    }
    let mut terms = Vec::with_capacity(projected);
    let mut point = vec![0.0f64; d];
    let mut odo = vec![0usize; d];
    'outer: loop {
        let mut weight = 1.0;
        for k in 0..d {
            point[k] = rules[k].nodes[odo[k]];
            weight *= rules[k].weights[odo[k]];
        }
        let v = f(&point);
        if !v.is_finite() {
            return Err(Error::NonFiniteValue {
                point: point.clone(),
            });
        }
        terms.push(weight * v);
        let mut k = 0;
        loop {
            if k == d {
                break 'outer;
            }
            odo[k] += 1;
            if odo[k] < rules[k].nodes.len() {
                break;
            }
            odo[k] = 0;
            k += 1;
        }
    }
    Ok(QuadResult::plain(pairwise_sum(&terms), projected))
}

/// Generalized sparse grid quadrature `Q_I(f) = sum_{i in I} Delta_i(f)`.
///
/// Function values at nodes shared between surpluses are computed once per
/// call. Surpluses are accumulated in the downset's insertion order with
/// pairwise summation.
pub fn downset_quadrature(
    family: RuleFamily,
    index_set: &Downset,
    f: impl Fn(&[f64]) -> f64,
    budget: usize,
) -> Result<QuadResult> {
    index_set.validate_closure()?;
    let f_obj: &dyn Fn(&[f64]) -> f64 = &f;
    let mut engine = TensorEngine::new(family, f_obj, budget);
    let mut surpluses = Vec::with_capacity(index_set.len());
    let mut log = BTreeMap::new();
    for idx in index_set.iter() {
        let v = engine.surplus_value(idx)?;
        surpluses.push(v);
        log.insert(idx.clone(), v);
    }
    Ok(QuadResult {
        value: pairwise_sum(&surpluses),
        point_count: engine.points_used(),
        downset: Some(index_set.clone()),
        surplus_log: log,
        truncated: false,
    })
}

/// The downset of the classical level-l sparse grid, `{i : |i|_1 <= l + d - 1}`.
pub fn classical_sparse_downset(level: u32, d: usize) -> Downset {
    let cap = MultiIndex::uniform(d, level);
    let budget_sum = level + d as u32 - 1;
    let mut indices = Vec::new();
    let mut idx = vec![1u32; d];
    loop {
        if idx.iter().sum::<u32>() <= budget_sum {
            indices.push(MultiIndex::new(idx.clone()));
        }
        let mut k = d;
        loop {
            if k == 0 {
                let set = Downset::from_indices(cap, indices)
                    .expect("lexicographic simplex enumeration is downward closed");
                return set;
            }
            k -= 1;
            if idx[k] < level {
                idx[k] += 1;
                for v in idx.iter_mut().skip(k + 1) {
                    *v = 1;
                }
                break;
            }
        }
    }
}

/// Classical level-l sparse grid quadrature in `d` dimensions.
pub fn classical_sparse_grid(
    family: RuleFamily,
    level: u32,
    d: usize,
    f: impl Fn(&[f64]) -> f64,
    budget: usize,
) -> Result<QuadResult> {
    let set = classical_sparse_downset(level, d);
    downset_quadrature(family, &set, f, budget)
}

/// Collapses a downset into a single point set with combined weights.
/// Duplicate nodes across surpluses merge with summed weights.
pub fn downset_point_set(family: RuleFamily, index_set: &Downset) -> Result<GridPointSet> {
    index_set.validate_closure()?;
    let d = index_set.dim();
    let mut rules: Vec<SurplusRule1D> = Vec::new();
    let ensure = |rules: &mut Vec<SurplusRule1D>, level: u32| -> Result<()> {
        while rules.len() < level as usize {
            rules.push(rules1d::make_surplus(family, rules.len() as u32 + 1)?);
        }
        Ok(())
    };
    let mut acc: HashMap<Vec<u64>, (Vec<f64>, f64)> = HashMap::new();
    for idx in index_set.iter() {
        for k in 0..d {
            ensure(&mut rules, idx.level(k))?;
        }
        let mut odo = vec![0usize; d];
        let mut point = vec![0.0f64; d];
        'tensor: loop {
            let mut weight = 1.0;
            for k in 0..d {
                let s = &rules[(idx.level(k) - 1) as usize];
                point[k] = s.nodes[odo[k]];
                weight *= s.weights[odo[k]];
            }
            let key: Vec<u64> = point.iter().map(|x| x.to_bits()).collect();
            let entry = acc.entry(key).or_insert_with(|| (point.clone(), 0.0));
            entry.1 += weight;
            let mut k = 0;
            loop {
                if k == d {
                    break 'tensor;
                }
                odo[k] += 1;
                if odo[k] < rules[(idx.level(k) - 1) as usize].nodes.len() {
                    break;
                }
                odo[k] = 0;
                k += 1;
            }
        }
    }
    let mut entries: Vec<(Vec<f64>, f64)> = acc.into_values().collect();
    entries.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("grid nodes are finite and comparable")
    });
    let (points, weights) = entries.into_iter().unzip();
    Ok(GridPointSet {
        points,
        weights,
        source: format!("downset({} indices)", index_set.len()),
    })
}
