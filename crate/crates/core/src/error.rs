use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid group specification: {0}")]
    InvalidGroup(String),

    #[error("invalid element: {0}")]
    InvalidElement(String),

    #[error("invalid offspring distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("series divergence suspected at index {index} (partial sum {partial_sum:e})")]
    DivergenceSuspected { index: usize, partial_sum: f64 },

    #[error("sampling failed after {attempts} attempts")]
    SamplingFailure { attempts: usize },

    #[error("truncation insufficient: {inconclusive} of {total} samples could not certify their neighbourhoods")]
    TruncationInsufficient { inconclusive: usize, total: usize },

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
