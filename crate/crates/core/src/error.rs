use thiserror::Error;

/// Errors raised by the simulation toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("a Hilbert space needs at least one mode")]
    EmptySpace,

    #[error("mode {index}: cutoff must be at least 1, got {cutoff}")]
    InvalidCutoff { index: usize, cutoff: usize },

    #[error("mode index {index} out of range for a space with {modes} modes")]
    InvalidModeIndex { index: usize, modes: usize },

    #[error("space does not match the model: {0}")]
    SpaceMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular input: {0}")]
    Singular(String),

    #[error("time {t} ns outside pulse window [0, {duration}] ns")]
    TimeOutOfRange { t: f64, duration: f64 },

    #[error("missing state label `{0}`")]
    MissingLabel(String),

    #[error("ambiguous or failed state labeling: {0}")]
    Labeling(String),

    #[error("integrator failed: {0}")]
    Integration(String),

    #[error("numerical quality check failed: {0}")]
    Quality(String),

    #[error("incomplete input set: {0}")]
    Incomplete(String),

    #[error("permutation P{k} needs N >= {min}, got N = {n}")]
    PermutationTooSmall { k: usize, n: usize, min: usize },

    #[error("rank-deficient weight fit: {0}")]
    RankDeficient(String),

    #[error("truncation too small: {0}")]
    Truncation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
