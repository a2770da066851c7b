use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unknown sensor id {id} (plant has {available} sensors)")]
    UnknownSensor { id: usize, available: usize },

    #[error("mode of Gamma(a = {alpha}, b) is undefined for a <= 1")]
    ModeUndefined { alpha: f64 },

    #[error("need both classes present, got {positives} positives and {negatives} negatives")]
    SingleClass { positives: usize, negatives: usize },

    #[error("empty sample: {0}")]
    EmptySample(String),

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("numerical instability: {0}")]
    Unstable(String),

    #[error("missing data: {0}")]
    Missing(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
