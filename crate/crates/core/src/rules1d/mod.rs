//! Hierarchical 1D quadrature rules on the reference interval `[-1, 1]`.
//!
//! Three nested families are provided: the composite trapezoidal rule, the
//! Clenshaw-Curtis rule on Chebyshev extrema, and the Gauss-Patterson rule
//! (Kronrod-style extensions of the one-point Gauss rule, tabulated). Level 1
//! of every family is the single node at the origin so the hierarchy nests
//! from the root. All constructions are bit-reproducible, and nodes shared
//! between consecutive levels compare bit-equal, which the multidimensional
//! code relies on for function-value reuse.

mod gauss_patterson;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// The supported nested quadrature families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuleFamily {
    Trapezoidal,
    ClenshawCurtis,
    GaussPatterson,
}

impl RuleFamily {
    pub const ALL: [RuleFamily; 3] = [
        RuleFamily::Trapezoidal,
        RuleFamily::ClenshawCurtis,
        RuleFamily::GaussPatterson,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            RuleFamily::Trapezoidal => "tra",
            RuleFamily::ClenshawCurtis => "cc",
            RuleFamily::GaussPatterson => "gp",
        }
    }
}

// Trapezoidal grids beyond this hold over half a million nodes; Clenshaw-Curtis
// weight assembly is O(N^2) so it caps earlier.
const MAX_LEVEL_TRAPEZOIDAL: u32 = 20;
const MAX_LEVEL_CLENSHAW_CURTIS: u32 = 14;

/// A quadrature rule: `Q_i(f) = sum_j c_{i,j} f(x_{i,j})`.
#[derive(Debug, Clone)]
pub struct Rule1D {
    pub family: RuleFamily,
    pub level: u32,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// The difference rule `Delta_i = Q_i - Q_{i-1}` expressed on the level-i
/// nodes: surplus weights equal the level-i weights on new nodes and the
/// weight difference on nodes shared with level i-1 (`Q_0 = 0`).
#[derive(Debug, Clone)]
pub struct SurplusRule1D {
    pub family: RuleFamily,
    pub level: u32,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SurplusRule1D {
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

impl Rule1D {
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Number of nodes of the rule at `level`.
pub fn point_count(family: RuleFamily, level: u32) -> Result<usize> {
    check_level(family, level)?;
    Ok(match family {
        RuleFamily::Trapezoidal | RuleFamily::ClenshawCurtis => {
            if level == 1 {
                1
            } else {
                (1usize << (level - 1)) + 1
            }
        }
        RuleFamily::GaussPatterson => (1usize << level) - 1,
    })
}

fn check_level(family: RuleFamily, level: u32) -> Result<()> {
    let max = match family {
        RuleFamily::Trapezoidal => MAX_LEVEL_TRAPEZOIDAL,
        RuleFamily::ClenshawCurtis => MAX_LEVEL_CLENSHAW_CURTIS,
        RuleFamily::GaussPatterson => gauss_patterson::MAX_LEVEL,
    };
    if level == 0 || level > max {
        return Err(Error::UnsupportedLevel { family, level });
    }
    Ok(())
}

/// Builds the quadrature rule for `family` at `level`.
pub fn make_rule(family: RuleFamily, level: u32) -> Result<Rule1D> {
    check_level(family, level)?;
    let (nodes, weights) = match family {
        RuleFamily::Trapezoidal => trapezoidal(level),
        RuleFamily::ClenshawCurtis => clenshaw_curtis(level),
        RuleFamily::GaussPatterson => gauss_patterson_rule(level),
    };
    Ok(Rule1D {
        family,
        level,
        nodes,
        weights,
    })
}

/// Builds the difference (surplus) rule `Delta_level = Q_level - Q_{level-1}`.
pub fn make_surplus(family: RuleFamily, level: u32) -> Result<SurplusRule1D> {
    let rule = make_rule(family, level)?;
    if level == 1 {
        return Ok(SurplusRule1D {
            family,
            level,
            nodes: rule.nodes,
            weights: rule.weights,
        });
    }
    let prev = make_rule(family, level - 1)?;
    let mut weights = rule.weights.clone();
    for (x_prev, w_prev) in prev.nodes.iter().zip(&prev.weights) {
        let j = find_node(&rule.nodes, *x_prev)
            .unwrap_or_else(|| panic!("{family:?} level {level} lost node {x_prev}"));
        weights[j] -= w_prev;
    }
    Ok(SurplusRule1D {
        family,
        level,
        nodes: rule.nodes,
        weights,
    })
}

// Nested families share nodes bit-exactly by construction; the tolerance only
// guards against a future rule that misses that property.
fn find_node(nodes: &[f64], x: f64) -> Option<usize> {
    let j = nodes.partition_point(|&n| n < x);
    for cand in [j.wrapping_sub(1), j, j + 1] {
        if let Some(&n) = nodes.get(cand) {
            if (n - x).abs() <= 1e-13 {
                return Some(cand);
            }
        }
    }
    None
}

/// The polynomial degree through which exactness is guaranteed (and asserted
/// by the test suite). Trapezoidal rules are exact for affine integrands
/// only; an N-point Clenshaw-Curtis rule is taken as exact through degree
/// N-1; an N-point Gauss-Patterson rule through (3N-1)/2. Empirically the
/// Gauss-Patterson tables are exact through (3N+1)/2, one degree more than
/// asserted here.
pub fn polynomial_exactness_degree(family: RuleFamily, level: u32) -> Result<u32> {
    let n = point_count(family, level)? as u32;
    Ok(match family {
        RuleFamily::Trapezoidal => 1,
        RuleFamily::ClenshawCurtis => n - 1,
        RuleFamily::GaussPatterson => (3 * n - 1) / 2,
    })
}

fn trapezoidal(level: u32) -> (Vec<f64>, Vec<f64>) {
    if level == 1 {
        // midpoint rule
        return (vec![0.0], vec![2.0]);
    }
    let n = 1usize << (level - 1);
    let h = 2.0 / n as f64; // exact power of two
    let mut nodes = Vec::with_capacity(n + 1);
    let mut weights = Vec::with_capacity(n + 1);
    for j in 0..=n {
        nodes.push(j as f64 * h - 1.0);
        weights.push(if j == 0 || j == n { h / 2.0 } else { h });
    }
    (nodes, weights)
}

fn clenshaw_curtis(level: u32) -> (Vec<f64>, Vec<f64>) {
    if level == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let n = 1usize << (level - 1); // node count N = n + 1, n even
    let mut nodes = vec![0.0; n + 1];
    for j in 0..n / 2 {
        // sin form keeps the grid exactly symmetric and nested across levels
        let arg = PI * (2.0 * j as f64 - n as f64) / (2.0 * n as f64);
        let x = arg.sin();
        nodes[j] = x;
        nodes[n - j] = -x;
    }
    nodes[n / 2] = 0.0;

    let mut weights = vec![0.0; n + 1];
    for j in 0..=n / 2 {
        let cj = if j == 0 { 0.5 } else { 1.0 };
        let mut acc = 0.0;
        for m in 0..=n / 2 {
            let dm = if m == 0 || m == n / 2 { 0.5 } else { 1.0 };
            let theta = 2.0 * PI * (m * j) as f64 / n as f64;
            acc += dm * theta.cos() / (1.0 - 4.0 * (m * m) as f64);
        }
        let w = 4.0 * cj / n as f64 * acc;
        // j counts from the x = +1 end in the classical formula; our nodes
        // ascend, but the weights are symmetric so the order is shared.
        weights[j] = w;
        weights[n - j] = w;
    }
    (nodes, weights)
}

fn gauss_patterson_rule(level: u32) -> (Vec<f64>, Vec<f64>) {
    // merge the tabulated positive nodes of all levels up to `level`
    let mut nonneg = vec![0.0f64];
    for l in 2..=level {
        let new = gauss_patterson::NEW_POSITIVE_NODES[(l - 1) as usize];
        let mut merged = Vec::with_capacity(nonneg.len() + new.len());
        let (mut a, mut b) = (0, 0);
        while a < nonneg.len() || b < new.len() {
            match (nonneg.get(a), new.get(b)) {
                (Some(&x), Some(&y)) if x < y => {
                    merged.push(x);
                    a += 1;
                }
                (Some(_), Some(&y)) => {
                    merged.push(y);
                    b += 1;
                }
                (Some(&x), None) => {
                    merged.push(x);
                    a += 1;
                }
                (None, Some(&y)) => {
                    merged.push(y);
                    b += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        nonneg = merged;
    }
    let half_w = gauss_patterson::HALF_WEIGHTS[(level - 1) as usize];
    debug_assert_eq!(half_w.len(), nonneg.len());

    let m = nonneg.len();
    let mut nodes = Vec::with_capacity(2 * m - 1);
    let mut weights = Vec::with_capacity(2 * m - 1);
    for i in (1..m).rev() {
        nodes.push(-nonneg[i]);
        weights.push(half_w[i]);
    }
    for i in 0..m {
        nodes.push(nonneg[i]);
        weights.push(half_w[i]);
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn monomial_integral(k: u32) -> f64 {
        if k % 2 == 0 {
            2.0 / (k as f64 + 1.0)
        } else {
            0.0
        }
    }

    #[test]
    fn point_counts_match_the_family_formulas() {
        for level in 1..=6u32 {
            let tc = if level == 1 {
                1
            } else {
                (1usize << (level - 1)) + 1
            };
            assert_eq!(point_count(RuleFamily::Trapezoidal, level).unwrap(), tc);
            assert_eq!(point_count(RuleFamily::ClenshawCurtis, level).unwrap(), tc);
            assert_eq!(
                point_count(RuleFamily::GaussPatterson, level).unwrap(),
                (1usize << level) - 1
            );
        }
    }

    #[test]
    fn gauss_patterson_level_limit() {
        assert!(matches!(
            make_rule(RuleFamily::GaussPatterson, 9),
            Err(Error::UnsupportedLevel { .. })
        ));
        assert!(make_rule(RuleFamily::GaussPatterson, 8).is_ok());
    }

    #[test]
    fn trapezoidal_level2_is_the_three_point_composite_rule() {
        let r = make_rule(RuleFamily::Trapezoidal, 2).unwrap();
        assert_eq!(r.nodes, vec![-1.0, 0.0, 1.0]);
        assert_eq!(r.weights, vec![0.5, 1.0, 0.5]);
        let r1 = make_rule(RuleFamily::Trapezoidal, 1).unwrap();
        assert_eq!((r1.nodes, r1.weights), (vec![0.0], vec![2.0]));
    }

    #[test]
    fn gauss_patterson_level2_is_the_three_point_gauss_rule() {
        let r = make_rule(RuleFamily::GaussPatterson, 2).unwrap();
        let x = (3.0f64 / 5.0).sqrt();
        assert_abs_diff_eq!(r.nodes[0], -x, epsilon = 1e-15);
        assert_abs_diff_eq!(r.nodes[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.nodes[2], x, epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights[0], 5.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights[1], 8.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights[2], 5.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn clenshaw_curtis_level3_matches_the_cosine_transform_weights() {
        let r = make_rule(RuleFamily::ClenshawCurtis, 3).unwrap();
        let s = 0.5f64.sqrt();
        let expect_nodes = [-1.0, -s, 0.0, s, 1.0];
        let expect_weights = [1.0 / 15.0, 8.0 / 15.0, 12.0 / 15.0, 8.0 / 15.0, 1.0 / 15.0];
        for (got, want) in r.nodes.iter().zip(expect_nodes) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        for (got, want) in r.weights.iter().zip(expect_weights) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn rule_invariants_hold_across_families_and_levels() {
        for family in RuleFamily::ALL {
            for level in 1..=7u32 {
                let Ok(rule) = make_rule(family, level) else {
                    continue;
                };
                assert_eq!(rule.nodes.len(), point_count(family, level).unwrap());
                assert_eq!(rule.nodes.len(), rule.weights.len());
                let sum: f64 = rule.weights.iter().sum();
                assert_abs_diff_eq!(sum, 2.0, epsilon = 1e-13);
                for w in rule.nodes.windows(2) {
                    assert!(w[0] < w[1], "{family:?} level {level} not increasing");
                }
                let n = rule.nodes.len();
                for j in 0..n {
                    assert_abs_diff_eq!(rule.nodes[j], -rule.nodes[n - 1 - j], epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn nodes_nest_bit_exactly_between_levels() {
        for family in RuleFamily::ALL {
            for level in 1..=6u32 {
                let (Ok(a), Ok(b)) = (make_rule(family, level), make_rule(family, level + 1))
                else {
                    continue;
                };
                for x in &a.nodes {
                    assert!(
                        b.nodes.iter().any(|y| y.to_bits() == x.to_bits()),
                        "{family:?}: node {x} of level {level} missing at level {}",
                        level + 1
                    );
                }
            }
        }
    }

    #[test]
    fn exactness_through_the_guaranteed_degree() {
        for family in RuleFamily::ALL {
            for level in 1..=8u32 {
                let Ok(rule) = make_rule(family, level) else {
                    continue;
                };
                let deg = polynomial_exactness_degree(family, level).unwrap();
                for k in 0..=deg {
                    let got = rule.apply(|x| x.powi(k as i32));
                    assert!(
                        (got - monomial_integral(k)).abs() <= 1e-12,
                        "{family:?} level {level} degree {k}: err {:+.3e}",
                        got - monomial_integral(k)
                    );
                }
            }
        }
    }

    #[test]
    fn exactness_degree_examples() {
        assert_eq!(
            polynomial_exactness_degree(RuleFamily::GaussPatterson, 2).unwrap(),
            4
        );
        assert_eq!(
            polynomial_exactness_degree(RuleFamily::Trapezoidal, 5).unwrap(),
            1
        );
        assert_eq!(
            polynomial_exactness_degree(RuleFamily::ClenshawCurtis, 3).unwrap(),
            4
        );
        // GP level 4 has 15 points: (3*15 - 1)/2 = 22
        assert_eq!(
            polynomial_exactness_degree(RuleFamily::GaussPatterson, 4).unwrap(),
            22
        );
    }

    #[test]
    fn odd_monomials_integrate_to_zero() {
        for family in RuleFamily::ALL {
            for level in 1..=6u32 {
                let rule = make_rule(family, level).unwrap();
                for k in [1, 3, 5, 7] {
                    assert!(rule.apply(|x| x.powi(k)).abs() <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn surplus_weights_telescope_and_cancel() {
        let s = make_surplus(RuleFamily::Trapezoidal, 1).unwrap();
        assert_eq!((s.nodes.clone(), s.weights.clone()), (vec![0.0], vec![2.0]));

        let s2 = make_surplus(RuleFamily::Trapezoidal, 2).unwrap();
        assert_abs_diff_eq!(s2.apply(|x| x * x), 1.0, epsilon = 1e-15);

        let gp2 = make_surplus(RuleFamily::GaussPatterson, 2).unwrap();
        assert_abs_diff_eq!(gp2.apply(|_| 1.0), 0.0, epsilon = 1e-14);

        for family in RuleFamily::ALL {
            for level in 1..=6u32 {
                let s = make_surplus(family, level).unwrap();
                let sum: f64 = s.weights.iter().sum();
                let expect = if level == 1 { 2.0 } else { 0.0 };
                assert_abs_diff_eq!(sum, expect, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn summed_surpluses_reproduce_the_rule() {
        // 50 random polynomials and 20 random smooth functions
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for family in RuleFamily::ALL {
            let level = 5u32;
            let rule = make_rule(family, level).unwrap();
            let surpluses: Vec<_> = (1..=level)
                .map(|l| make_surplus(family, l).unwrap())
                .collect();
            let mut check = |f: &dyn Fn(f64) -> f64| {
                let direct = rule.apply(f);
                let telescoped: f64 = surpluses.iter().map(|s| s.apply(f)).sum();
                let scale = direct.abs().max(1e-3);
                assert!(
                    (direct - telescoped).abs() / scale <= 1e-12,
                    "{family:?}: {direct} vs {telescoped}"
                );
            };
            for _ in 0..50 {
                let c: Vec<f64> = (0..6).map(|_| next()).collect();
                check(&|x| c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck));
            }
            for _ in 0..20 {
                let (a, b, c) = (next(), next(), next());
                check(&|x| (a * x).sin() + (b * x).cos() * (c * x).exp());
            }
        }
    }
}
