use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix {index} is not symmetric but the model is self-adjoint")]
    AsymmetricCoefficient { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("summand {index} is not centered (mean norm {mean_norm:e})")]
    NonCenteredSummand { index: usize, mean_norm: f64 },

    #[error("model is not self-adjoint")]
    NotSelfAdjoint,

    #[error("model is not centered (A0 != 0)")]
    NotCentered,

    #[error("model is not isotropic (deviation {deviation:e})")]
    NotIsotropic { deviation: f64 },

    #[error("no convergence after {iterations} iterations (last window improvement {improvement:e})")]
    NoConvergence { iterations: usize, improvement: f64 },

    #[error("size limit exceeded: {what} = {value} > {limit}")]
    SizeLimit {
        what: &'static str,
        value: u128,
        limit: u128,
    },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid word: {0}")]
    InvalidWord(String),

    #[error("empty set")]
    EmptySet,

    #[error("invalid flattening: {0}")]
    InvalidSpec(String),

    #[error("post-condition violated: {0}")]
    PostCondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed file: {0}")]
    Format(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
