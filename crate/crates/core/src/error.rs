use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state vector has a non-finite entry at index {0}")]
    NonFinite(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty component: {0}")]
    EmptyComponent(&'static str),

    #[error("malformed history: {0}")]
    MalformedHistory(String),

    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid spec `{spec}`: {msg}")]
    Spec { spec: String, msg: String },

    #[error("non-invertible kernel head: |w0| = {0:e} is below 1e-9")]
    NonInvertibleHead(f64),

    #[error("non-invertible correlation weight at index {index}: {value:e}")]
    NonInvertibleWeight { index: usize, value: f64 },

    #[error("correlation weights exhausted at step {0}")]
    WeightsExhausted(usize),

    #[error("undecodable history: {0}")]
    Undecodable(String),

    #[error("state explosion: {count} reachable histories exceed the cap of {cap}")]
    StateExplosion { count: usize, cap: usize },

    #[error("environment episode is over; call reset first")]
    EpisodeOver,

    #[error("environment has not been reset")]
    NotReset,

    #[error("action {action} out of range (num_actions = {num_actions})")]
    InvalidAction { action: usize, num_actions: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("retry budget of {0} attempts exhausted")]
    RetryBudget(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn spec(spec: &str, msg: impl Into<String>) -> Self {
        Error::Spec {
            spec: spec.to_string(),
            msg: msg.into(),
        }
    }
}
