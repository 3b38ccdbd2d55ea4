use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid feature space: {0}")]
    InvalidSpace(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("queue saturated: utilization {utilization:.4} >= 1")]
    Saturated { utilization: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("invalid perturbation factor {factor} at position {index}")]
    InvalidFactor { index: usize, factor: f64 },

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("invalid weight {0}: weights must be finite and > 0")]
    InvalidWeight(f64),

    #[error("invalid cut-off {0}: must lie in [0, 1]")]
    InvalidCutoff(f64),

    #[error("datasets are defined over different feature spaces")]
    SpaceMismatch,

    #[error("cannot train on an empty dataset")]
    EmptyTrainingSet,

    #[error("knowledge base is empty")]
    EmptyKnowledgeBase,

    #[error("prediction {index} is zero")]
    DivisionByZero { index: usize },

    #[error("length mismatch: {left} predictions vs {right} observations")]
    LengthMismatch { left: usize, right: usize },

    #[error("too few samples: {samples} samples for {folds} folds")]
    TooFewSamples { samples: usize, folds: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("run config: {0}")]
    RunConfig(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by user-supplied configuration rather than
    /// by the computation itself.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::RunConfig(_))
    }
}
