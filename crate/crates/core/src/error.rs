use thiserror::Error;

/// Errors raised by model construction and analysis.
///
/// Numeric payloads are reported as `f64` regardless of the model's scalar type.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("conditional at prefix {prefix:?} is not a distribution (sum {sum}, offending entries {offending:?})")]
    NotADistribution { prefix: Vec<usize>, sum: f64, offending: Vec<(usize, f64)> },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is singular (pivot {pivot})")]
    Singular { pivot: usize },
    #[error("initial vector sums to {sum}, expected 1")]
    BadInit { sum: f64 },
    #[error("state {state}: termination plus outgoing mass is {total}, expected 1")]
    BadRow { state: usize, total: f64 },
    #[error("negative or non-finite entry at {location}")]
    NegativeEntry { location: String },
    #[error("no state is both accessible and co-accessible")]
    NoUsefulStates,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("prefix {prefix:?} has probability zero")]
    DeadPrefix { prefix: Vec<usize> },
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("enumeration needs {needed} prefixes but the budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("prefix mass vanished at step {t}")]
    SupportExhausted { t: usize },
    #[error("EOS lower bound violated at step {t} for prefix {prefix:?}")]
    BoundViolated { t: usize, prefix: Vec<usize> },
    #[error("no evidence at or beyond the threshold step")]
    EmptyEvidence,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
