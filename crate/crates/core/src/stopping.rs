//! Breakdown detection and the surrogate-trend stopping rule.
//!
//! Newton-type iterations under quadrature noise stop improving once the
//! gradient error passes `||G_bar|| / (1 + kappa(A_bar))`; `breakdown_check`
//! evaluates that inequality from a user-supplied error estimate or from the
//! forward-difference/surplus error model. Because the constants of that
//! model are rarely available, the practical rule is [`TrendMonitor`]: track
//! a higher-accuracy surrogate value of the objective at each iterate and
//! stop on non-improvement.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Inputs of the breakdown inequality.
#[derive(Debug, Clone, Default)]
pub struct BreakdownInputs {
    pub grad_norm: f64,
    /// Condition number of the (approximate) Hessian, >= 1.
    pub kappa: f64,
    /// Direct estimate of `||E1|| + ||E2||`, when available.
    pub error_estimate: Option<f64>,
    /// Error-model constants, used when no direct estimate is given.
    pub constants: Option<KConstants>,
}

/// Per-component constants of the gradient error model: the
/// finite-difference term `K1_q h` plus the quadrature term
/// `K2_q 2^{-l r} + K3_q sum_{i in L\I} 2^{-|i| r}`.
#[derive(Debug, Clone)]
pub struct KConstants {
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
    pub k3: Vec<f64>,
    /// Forward-difference step.
    pub h: f64,
    /// Mixed-smoothness order of the integrand.
    pub r: u32,
    /// Isotropic full-grid level of the comparison box.
    pub level: u32,
    /// Per-component values of `sum_{i in L\I} 2^{-r |i|}`; this tail may
    /// also be replaced by the rho-form bound of the adaptive module.
    pub downset_tail: Vec<f64>,
}

/// `||E1|| + ||E2||` assembled from the error-model constants.
pub fn assemble_error_estimate(k: &KConstants) -> f64 {
    let e1: f64 = k.k1.iter().map(|k1| (k1 * k.h).powi(2)).sum::<f64>().sqrt();
    let lvl = 2.0f64.powi(-((k.level * k.r) as i32));
    let e2: f64 = k
        .k2
        .iter()
        .zip(&k.k3)
        .zip(&k.downset_tail)
        .map(|((k2, k3), tail)| (k2 * lvl + k3 * tail).powi(2))
        .sum::<f64>()
        .sqrt();
    e1 + e2
}

/// True when the estimated gradient error exceeds
/// `||G_bar|| / (1 + kappa)`, i.e. further Newton-type iterations may stop
/// converging.
pub fn breakdown_check(inputs: &BreakdownInputs) -> Result<bool> {
    let estimate = match (inputs.error_estimate, &inputs.constants) {
        (Some(e), _) => e,
        (None, Some(k)) => assemble_error_estimate(k),
        (None, None) => return Err(Error::MissingEstimate),
    };
    Ok(estimate > inputs.grad_norm / (1.0 + inputs.kappa))
}

/// Decision of the trend rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TrendDecision {
    Continue,
    /// Stop, returning the iterate with the best probe value so far.
    Stop { at_iteration: usize },
}

/// Tracks a high-accuracy surrogate value `F_eps'(u_p)` of the objective at
/// each iterate and stops after `patience` consecutive non-improvements.
#[derive(Debug, Clone)]
pub struct TrendMonitor {
    pub probe_epsilon: f64,
    pub patience: usize,
    history: Vec<f64>,
    non_improving: usize,
}

impl TrendMonitor {
    pub fn new(probe_epsilon: f64, patience: usize) -> Self {
        assert!(patience >= 1);
        Self {
            probe_epsilon,
            patience,
            history: Vec::new(),
            non_improving: 0,
        }
    }

    /// The default probe accuracy: a quarter of the solver's quadrature
    /// threshold.
    pub fn for_solver_epsilon(epsilon: f64) -> Self {
        Self::new(epsilon / 4.0, 1)
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    /// Index of the smallest probe value seen so far.
    pub fn best_iteration(&self) -> usize {
        self.history
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite probes"))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// Records the probe value of the next iterate and decides whether to
    /// stop. A value at least as large as its predecessor counts as a
    /// non-improvement; `patience` of those in a row trigger the stop.
    pub fn observe(&mut self, new_value: f64) -> TrendDecision {
        assert!(new_value.is_finite());
        let worse = self
            .history
            .last()
            .is_some_and(|&last| new_value >= last);
        self.history.push(new_value);
        if worse {
            self.non_improving += 1;
            if self.non_improving >= self.patience {
                return TrendDecision::Stop {
                    at_iteration: self.best_iteration(),
                };
            }
        } else {
            self.non_improving = 0;
        }
        TrendDecision::Continue
    }
}

/// Least-squares quadratic fit, used to sanity-check the error model of the
/// trend rule against the data points `(|u* - u_p|, F_eps/4(u_p))`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuadraticFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Root-mean-square misfit.
    pub residual: f64,
}

pub fn quadratic_fit(points: &[(f64, f64)]) -> Result<QuadraticFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit);
    }
    let x0 = points[0].0;
    if points.iter().all(|p| (p.0 - x0).abs() == 0.0) {
        return Err(Error::DegenerateFit);
    }
    let n = points.len();
    let design = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => points[i].0 * points[i].0,
        1 => points[i].0,
        _ => 1.0,
    });
    let rhs = DVector::from_iterator(n, points.iter().map(|p| p.1));
    let svd = design.clone().svd(true, true);
    let coef = svd
        .solve(&rhs, 1e-12)
        .map_err(|_| Error::DegenerateFit)?;
    let misfit = design * &coef - rhs;
    let residual = (misfit.norm_squared() / n as f64).sqrt();
    Ok(QuadraticFit {
        a: coef[0],
        b: coef[1],
        c: coef[2],
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn breakdown_inequality() {
        let base = BreakdownInputs {
            grad_norm: 1.0,
            kappa: 1.0,
            error_estimate: Some(0.6),
            constants: None,
        };
        assert!(breakdown_check(&base).unwrap());
        let ok = BreakdownInputs {
            error_estimate: Some(0.4),
            ..base.clone()
        };
        assert!(!breakdown_check(&ok).unwrap());
        let zero = BreakdownInputs {
            error_estimate: Some(0.0),
            ..base.clone()
        };
        assert!(!breakdown_check(&zero).unwrap());
        let missing = BreakdownInputs {
            error_estimate: None,
            ..base
        };
        assert!(matches!(breakdown_check(&missing), Err(Error::MissingEstimate)));
    }

    #[test]
    fn breakdown_is_monotone_in_kappa_and_estimate() {
        let mk = |kappa: f64, est: f64| BreakdownInputs {
            grad_norm: 2.0,
            kappa,
            error_estimate: Some(est),
            constants: None,
        };
        for kappa in [1.0, 3.0, 10.0, 1e6] {
            for est in [0.0, 0.1, 0.5, 1.0, 5.0] {
                if breakdown_check(&mk(kappa, est)).unwrap() {
                    assert!(breakdown_check(&mk(kappa * 2.0, est)).unwrap());
                    assert!(breakdown_check(&mk(kappa, est * 2.0)).unwrap());
                }
            }
        }
    }

    #[test]
    fn error_model_arithmetic() {
        let zeros = KConstants {
            k1: vec![0.0],
            k2: vec![0.0],
            k3: vec![0.0],
            h: 0.01,
            r: 2,
            level: 3,
            downset_tail: vec![0.0],
        };
        assert_eq!(assemble_error_estimate(&zeros), 0.0);

        let fd_only = KConstants {
            k1: vec![1.0],
            ..zeros.clone()
        };
        assert_abs_diff_eq!(assemble_error_estimate(&fd_only), 0.01, epsilon = 1e-15);

        let quad_only = KConstants {
            k1: vec![0.0],
            k2: vec![1.0],
            ..zeros
        };
        assert_abs_diff_eq!(
            assemble_error_estimate(&quad_only),
            2.0f64.powi(-6),
            epsilon = 1e-15
        );
    }

    #[test]
    fn trend_stops_on_first_rise_with_patience_one() {
        let mut m = TrendMonitor::new(0.25, 1);
        assert_eq!(m.observe(5.0), TrendDecision::Continue);
        assert_eq!(m.observe(3.0), TrendDecision::Continue);
        assert_eq!(m.observe(2.0), TrendDecision::Continue);
        assert_eq!(m.observe(2.5), TrendDecision::Stop { at_iteration: 2 });
    }

    #[test]
    fn trend_never_stops_on_strict_decrease() {
        let mut m = TrendMonitor::new(0.25, 1);
        for k in 0..100 {
            assert_eq!(m.observe(100.0 - k as f64), TrendDecision::Continue);
        }
    }

    #[test]
    fn trend_respects_patience() {
        let mut m = TrendMonitor::new(0.25, 2);
        assert_eq!(m.observe(3.0), TrendDecision::Continue);
        assert_eq!(m.observe(1.0), TrendDecision::Continue);
        assert_eq!(m.observe(1.5), TrendDecision::Continue);
        assert_eq!(m.observe(1.6), TrendDecision::Stop { at_iteration: 1 });
        // an improvement resets the streak
        let mut m = TrendMonitor::new(0.25, 2);
        for v in [3.0, 1.0, 1.5, 1.4, 1.3] {
            assert_eq!(m.observe(v), TrendDecision::Continue);
        }
    }

    #[test]
    fn quadratic_fit_recovers_exact_parabolas() {
        let pts: Vec<(f64, f64)> = [0.0, 0.5, 1.0, 2.0].iter().map(|&x| (x, x * x)).collect();
        let fit = quadratic_fit(&pts).unwrap();
        assert_abs_diff_eq!(fit.a, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.b, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.c, 0.0, epsilon = 1e-10);
        assert!(fit.residual < 1e-12);

        let pts: Vec<(f64, f64)> = [0.1, 0.7, 1.3, 2.1]
            .iter()
            .map(|&x| (x, 2.0 * x * x + 1.0))
            .collect();
        let fit = quadratic_fit(&pts).unwrap();
        assert_abs_diff_eq!(fit.a, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.b, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.c, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn quadratic_fit_rejects_degenerate_inputs() {
        assert!(matches!(
            quadratic_fit(&[(1.0, 2.0), (1.0, 3.0)]),
            Err(Error::DegenerateFit)
        ));
        assert!(matches!(
            quadratic_fit(&[(1.0, 2.0), (1.0, 3.0), (1.0, 4.0)]),
            Err(Error::DegenerateFit)
        ));
    }
}
