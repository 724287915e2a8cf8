use lmtight_core::Error as CoreError;
use thiserror::Error;

use crate::model_file::ParseError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("enumeration needs {needed} prefixes but --budget is {budget}; raise --budget or lower --horizon")]
    Budget { needed: u128, budget: u128 },
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    /// 1 for bad input, 2 when an internal invariant failed.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e {
                CoreError::InvalidAlphabet(_)
                | CoreError::UnknownSymbol(_)
                | CoreError::EmptyCorpus
                | CoreError::OutOfRange(_)
                | CoreError::BudgetExceeded { .. } => 1,
                _ => 2,
            },
            _ => 1,
        }
    }
}
