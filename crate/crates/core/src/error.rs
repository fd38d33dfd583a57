use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for variable {var} (levels = {levels})")]
    IndexOutOfRange { var: usize, index: usize, levels: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("bit vector is not a valid one-hot configuration (block {block} has {active} active bits)")]
    InvalidOneHot { block: usize, active: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("{what} exceeds capacity ({requested} > {limit})")]
    Capacity { what: &'static str, requested: usize, limit: usize },

    #[error("search space exhausted: all {0} grid points have been evaluated")]
    Exhausted(u128),

    #[error("evaluation failed: {0}")]
    Evaluator(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::Iteration { iteration, source: Box::new(self) }
    }
}
