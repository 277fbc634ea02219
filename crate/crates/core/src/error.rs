use crate::grid_index::MultiIndex;
use crate::rules1d::RuleFamily;
use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("level {level} is not supported for the {family:?} rule")]
    UnsupportedLevel { family: RuleFamily, level: u32 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("index set is not downward closed near {index:?}")]
    NotADownset { index: MultiIndex },
    #[error("evaluation budget exceeded ({spent} evaluations, budget {budget})")]
    BudgetExceeded { spent: usize, budget: usize },
    #[error("integrand returned a non-finite value at {point:?}")]
    NonFiniteValue { point: Vec<f64> },
    #[error("point outside the problem domain: {0:?}")]
    DomainViolation(Vec<f64>),
    #[error("Hessian estimate is numerically singular (condition number {kappa:.3e})")]
    SingularHessian { kappa: f64 },
    #[error("no progress: step norm {step_norm:.3e} with gradient above tolerance")]
    NoProgress { step_norm: f64 },
    #[error("line search failed after {attempts} trial steps")]
    LineSearchFailed { attempts: usize },
    #[error("(I - A) is singular; states cannot be solved from the dynamics")]
    SingularSystem,
    #[error("density does not integrate to 1 over its domain (got {got})")]
    DensityNotNormalized { got: f64 },
    #[error("breakdown check needs a direct error estimate or the K constants")]
    MissingEstimate,
    #[error("quadratic fit needs at least 3 points, not all at the same abscissa")]
    DegenerateFit,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown problem '{0}'")]
    UnknownProblem(String),
    #[error("unknown method '{0}'")]
    UnknownMethod(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
