use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty population: n_nodes must be positive")]
    EmptyPopulation,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("heterogeneity spec error: {0}")]
    Spec(String),
    #[error("metric undefined at node {0}: degree is zero")]
    UndefinedMetric(usize),
    #[error("cannot seed node {0}: degree is zero")]
    CannotSeed(usize),
    #[error("edge current undefined at node {0}: outgoing weights sum to zero")]
    UndefinedCurrent(usize),
    #[error("time {t} is beyond the recorded trace (last step {last})")]
    Range { t: usize, last: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("seed selection failed: {0}")]
    SeedSelection(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the engine's own invariants, as opposed to bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Invariant(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
