use std::path::PathBuf;

/// Errors produced by the optimizer, the benchmark problems and the harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("objective vector must have at least 2 entries, got {0}")]
    TooFewObjectives(usize),

    #[error("objective entry {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("only bi-objective hypervolume is supported, got {0} objectives")]
    UnsupportedDimension(usize),

    #[error("hypervolume gradient is undefined at this point: {0}")]
    UndefinedGradient(&'static str),

    #[error("exploitation must start from a point with positive exclusive contribution")]
    ZeroContribution,

    #[error("evaluation budget of {0} exhausted")]
    BudgetExhausted(u64),

    #[error("point lies outside the decision box at coordinate {index} ({value})")]
    OutOfBounds { index: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown problem `{0}` (expected zdt1, zdt2, zdt3, zdt4 or zdt6)")]
    UnknownProblem(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
