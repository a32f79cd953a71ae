use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("frequency grid mismatch: {0}")]
    GridMismatch(String),

    #[error("calibration sample {index} of {which} has zero magnitude")]
    ZeroCalibrationSample { which: &'static str, index: usize },

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("no multipath component exceeds the detection threshold")]
    EmptyResult,

    #[error("cannot form {k} clusters from {n} points")]
    TooFewPoints { n: usize, k: usize },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("too few rays for a cursor fit: need at least 2, got {0}")]
    TooFewRays(usize),

    #[error("no drop has two or more clusters (average cluster count {avg_num_clusters})")]
    InsufficientClusters { avg_num_clusters: f64 },

    #[error("preset {0} carries no cluster model (KF-only)")]
    MissingClusterModel(String),

    #[error("tap delay {delay_ns} ns outside the unambiguous span [0, {span_ns}) ns")]
    DelayOutOfRange { delay_ns: f64, span_ns: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown preset {0}")]
    UnknownPreset(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{path}: unit mismatch: {message}")]
    UnitMismatch { path: String, message: String },

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
