//! Step-length selection along a search direction.

use crate::error::{Error, Result};

/// Line search strategy of a quasi-Newton step.
#[derive(Debug, Clone, Copy)]
pub enum LineSearch {
    /// Bracket-and-zoom search enforcing the strong Wolfe conditions.
    StrongWolfe { c1: f64, c2: f64 },
    /// Armijo backtracking from a unit step.
    Backtracking,
    /// Vertex of the parabola through three trial points; exact for
    /// objectives quadratic along the ray.
    ExactQuadratic,
}

impl Default for LineSearch {
    fn default() -> Self {
        LineSearch::StrongWolfe { c1: 1e-4, c2: 0.9 }
    }
}

/// Outcome of a search: the chosen step, the objective there, and whether a
/// strong Wolfe search fell back to plain backtracking.
#[derive(Debug, Clone, Copy)]
pub struct SearchOutcome {
    pub alpha: f64,
    pub phi_alpha: f64,
    pub fallback: bool,
}

const MAX_BRACKET: usize = 12;
const MAX_ZOOM: usize = 30;

/// Strong Wolfe search (bracket then zoom with bisection).
///
/// `phi(alpha)` is the objective along the ray and `dphi(alpha)` the
/// directional derivative; `dphi0` must be negative.
pub fn strong_wolfe(
    phi0: f64,
    dphi0: f64,
    phi: &mut dyn FnMut(f64) -> Result<f64>,
    dphi: &mut dyn FnMut(f64) -> Result<f64>,
    c1: f64,
    c2: f64,
) -> Result<SearchOutcome> {
    debug_assert!(dphi0 < 0.0, "search direction must be a descent direction");
    let mut alpha_prev = 0.0;
    let mut phi_prev = phi0;
    let mut alpha = 1.0;
    let mut bracket: Option<(f64, f64, f64, f64)> = None; // lo, phi_lo, hi, phi_hi
    for i in 0..MAX_BRACKET {
        let phi_a = phi(alpha)?;
        if phi_a > phi0 + c1 * alpha * dphi0 || (i > 0 && phi_a >= phi_prev) {
            bracket = Some((alpha_prev, phi_prev, alpha, phi_a));
            break;
        }
        let dphi_a = dphi(alpha)?;
        if dphi_a.abs() <= -c2 * dphi0 {
            return Ok(SearchOutcome {
                alpha,
                phi_alpha: phi_a,
                fallback: false,
            });
        }
        if dphi_a >= 0.0 {
            bracket = Some((alpha, phi_a, alpha_prev, phi_prev));
            break;
        }
        alpha_prev = alpha;
        phi_prev = phi_a;
        alpha *= 2.0;
    }
    let Some((mut lo, mut phi_lo, mut hi, mut phi_hi)) = bracket else {
        return Err(Error::LineSearchFailed {
            attempts: MAX_BRACKET,
        });
    };

    for _ in 0..MAX_ZOOM {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() < 1e-14 * lo.abs().max(1.0) {
            return Ok(SearchOutcome {
                alpha: mid,
                phi_alpha: phi(mid)?,
                fallback: false,
            });
        }
        let phi_m = phi(mid)?;
        if phi_m > phi0 + c1 * mid * dphi0 || phi_m >= phi_lo {
            hi = mid;
            phi_hi = phi_m;
        } else {
            let dphi_m = dphi(mid)?;
            if dphi_m.abs() <= -c2 * dphi0 {
                return Ok(SearchOutcome {
                    alpha: mid,
                    phi_alpha: phi_m,
                    fallback: false,
                });
            }
            if dphi_m * (hi - lo) >= 0.0 {
                hi = lo;
                phi_hi = phi_lo;
            }
            lo = mid;
            phi_lo = phi_m;
        }
    }
    let _ = phi_hi;
    Err(Error::LineSearchFailed { attempts: MAX_ZOOM })
}

/// Armijo backtracking from a unit step.
pub fn backtracking(
    phi0: f64,
    dphi0: f64,
    phi: &mut dyn FnMut(f64) -> Result<f64>,
    c1: f64,
) -> Result<SearchOutcome> {
    let mut alpha = 1.0;
    for attempts in 0..60 {
        let phi_a = phi(alpha)?;
        if phi_a <= phi0 + c1 * alpha * dphi0 {
            return Ok(SearchOutcome {
                alpha,
                phi_alpha: phi_a,
                fallback: false,
            });
        }
        alpha *= 0.5;
        if alpha < 1e-16 {
            return Err(Error::LineSearchFailed { attempts });
        }
    }
    Err(Error::LineSearchFailed { attempts: 60 })
}

/// Exact step for objectives quadratic along the ray, from the parabola
/// through alpha = 0, 1, 2. Falls back to backtracking when the fitted
/// curvature is not positive.
pub fn exact_quadratic(
    phi0: f64,
    dphi0: f64,
    phi: &mut dyn FnMut(f64) -> Result<f64>,
) -> Result<SearchOutcome> {
    let phi1 = phi(1.0)?;
    let phi2 = phi(2.0)?;
    let a = 0.5 * (phi2 - 2.0 * phi1 + phi0);
    let b = 0.5 * (4.0 * phi1 - 3.0 * phi0 - phi2);
    if a > 1e-300 {
        let alpha = -b / (2.0 * a);
        if alpha > 0.0 && alpha.is_finite() {
            return Ok(SearchOutcome {
                alpha,
                phi_alpha: phi(alpha)?,
                fallback: false,
            });
        }
    }
    backtracking(phi0, dphi0, phi, 1e-4).map(|o| SearchOutcome {
        fallback: true,
        ..o
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strong_wolfe_finds_the_quadratic_minimum_region() {
        // phi(a) = (a - 3)^2 along the ray
        let mut phi = |a: f64| Ok((a - 3.0) * (a - 3.0));
        let mut dphi = |a: f64| Ok(2.0 * (a - 3.0));
        let out = strong_wolfe(9.0, -6.0, &mut phi, &mut dphi, 1e-4, 0.9).unwrap();
        assert!(out.phi_alpha < 9.0);
        assert!(2.0 * (out.alpha - 3.0) >= 0.9 * -6.0 * -1.0 - 10.0); // curvature held
        assert!((2.0 * (out.alpha - 3.0)).abs() <= 0.9 * 6.0 + 1e-12);
    }

    #[test]
    fn exact_quadratic_lands_on_the_vertex() {
        let mut phi = |a: f64| Ok(2.0 * (a - 0.4) * (a - 0.4) + 1.0);
        let out = exact_quadratic(2.0 * 0.16 + 1.0, -1.6, &mut phi).unwrap();
        assert!((out.alpha - 0.4).abs() < 1e-12);
        assert!(!out.fallback);
    }

    #[test]
    fn backtracking_satisfies_armijo() {
        let phi0 = 1.0;
        let dphi0 = -2.0;
        // steep far away, fine near zero
        let mut phi = |a: f64| Ok(1.0 - 2.0 * a + 8.0 * a * a);
        let out = backtracking(phi0, dphi0, &mut phi, 1e-4).unwrap();
        assert!(out.phi_alpha <= phi0 + 1e-4 * out.alpha * dphi0);
    }

    #[test]
    fn hopeless_searches_error_out() {
        // rises steeply enough that halving never restores Armijo before the
        // minimum step is reached
        let mut phi = |a: f64| Ok(1.0 + a.sqrt());
        let out = backtracking(1.0, -1.0, &mut phi, 1e-4);
        assert!(matches!(out, Err(Error::LineSearchFailed { .. })));
    }
}
