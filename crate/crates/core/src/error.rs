use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("index ({0}, {1}, {2}) out of range for dims ({3}, {4}, {5})")]
    IndexOutOfRange(usize, usize, usize, usize, usize, usize),

    #[error("duplicate sample index ({0}, {1}, {2})")]
    DuplicateIndex(usize, usize, usize),

    #[error("degenerate dims: every mode size must be positive")]
    DegenerateDims,

    #[error("rank-deficient core: {0}")]
    RankDeficient(String),

    #[error("invalid rank target: requested ({0}, {1}) exceeds current ({2}, {3})")]
    RankTarget(usize, usize, usize, usize),

    #[error("infeasible ranks ({0}, {1}) for dims ({2}, {3}, {4})")]
    InfeasibleRanks(usize, usize, usize, usize, usize),

    #[error("empty sample set")]
    EmptySampleSet,

    #[error("line search failed: {0}")]
    LineSearch(String),

    #[error("svd did not converge")]
    SvdFailure,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
