use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the quality toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions {width}x{height}: {reason}")]
    Dimension { width: usize, height: usize, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("segmentation failed: {0}")]
    Segmentation(String),

    #[error("ridge period estimation failed: {0}")]
    PeriodEstimation(String),

    #[error("implausible scale factor {0:.4} (allowed range [0.1, 10])")]
    ImplausibleScale(f64),

    #[error("preprocessing stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("feature family `{family}`: {reason}")]
    Feature { family: &'static str, reason: String },

    #[error("training failed: {0}")]
    Training(String),

    #[error("feature count mismatch: model expects {expected}, got {actual}")]
    FeatureCount { expected: usize, actual: usize },

    #[error("model format error at byte offset {offset}: {reason}")]
    ModelFormat { offset: usize, reason: String },

    #[error("metric error: {0}")]
    Metric(String),

    #[error("{path}: line {line}: {reason}")]
    Csv { path: PathBuf, line: u64, reason: String },

    #[error("image format error: {0}")]
    ImageFormat(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }
}
