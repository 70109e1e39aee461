use thiserror::Error;

use crate::lp::LpStatus;

/// Errors raised by the solvers, reductions and factorizations.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("inadmissible support: {0}")]
    Inadmissible(String),

    #[error("sequence is not self-converse (max deviation {0:e})")]
    NotSelfConverse(f64),

    #[error("not positive definite: minimum transform value {0:e}")]
    NotPositiveDefinite(f64),

    #[error("root finder did not converge after {iterations} iterations (max scaled residual {residual:e})")]
    RootsDidNotConverge { iterations: usize, residual: f64 },

    #[error("root pairing failed: {0}")]
    RootPairing(String),

    #[error("factorization residual {residual:e} exceeds tolerance {tol:e}")]
    FactorResidual { residual: f64, tol: f64 },

    #[error("linear program finished with status {0:?}")]
    LpStatus(LpStatus),

    #[error("linear program hit the pivot limit ({0})")]
    LpIterationLimit(usize),

    #[error("exchange method did not converge in {rounds} rounds (violation {violation:e})")]
    ExchangeDidNotConverge { rounds: usize, violation: f64 },

    #[error("exchange value {exchange} and discretized value {grid} disagree by more than {limit:e}")]
    SolverDisagreement { exchange: f64, grid: f64, limit: f64 },

    #[error("enumeration budget exceeded: {candidates} candidates (limit {limit})")]
    BudgetExceeded { candidates: u128, limit: u128 },

    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    #[error("unbounded domain: {0}")]
    Unbounded(String),

    #[error("theorem violation: {0}")]
    TheoremViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
