use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular matrix")]
    SingularMatrix,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate step: steplength denominator {0:e} is effectively zero")]
    DegenerateStep(f64),

    #[error("non-finite error value encountered while probing derivatives")]
    NonFiniteEvaluation,

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
