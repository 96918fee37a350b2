use thiserror::Error;

/// Errors raised by the solver, sampler, oracle and verification harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} must lie in {range}, got {value}")]
    Domain {
        name: &'static str,
        range: &'static str,
        value: f64,
    },

    #[error("trial count n must be at least 1, got {0}")]
    ZeroTrials(u32),

    #[error("target correlation r = {r} exceeds the attainable bound {bound:.3} (exact {bound}) for these marginals")]
    InfeasibleCorrelation { r: f64, bound: f64 },

    #[error("negative target correlation r = {0} is not supported; only 0 <= r <= bound")]
    NegativeCorrelation(f64),

    #[error("invalid cell probabilities: {0}")]
    InvalidCells(String),

    #[error("conditional law is degenerate: {0}")]
    DegenerateConditional(&'static str),

    #[error("exact enumeration refuses n = {n}; cap is {cap}")]
    EnumerationCap { n: u32, cap: u32 },

    #[error("conditioning event {what} = {value} has zero probability")]
    UnsupportedCondition { what: &'static str, value: u32 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("correlation is undefined: {0}")]
    UndefinedCorrelation(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
