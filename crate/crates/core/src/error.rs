use std::path::PathBuf;

use crate::autodiff::AutodiffError;
use crate::encoding::EncodingError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("input width {found} does not match model width {expected}")]
    Width { expected: usize, found: usize },
    #[error("classifier training needs both classes, all labels are {0}")]
    SingleClass(u8),
    #[error("non-finite value in flow layer {layer}: {source}")]
    Flow { layer: usize, source: AutodiffError },
    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    Diverged { epoch: usize, batch: usize, detail: String },
    #[error("metric undefined: {0}")]
    Metric(String),
    #[error("no test inputs with predicted probability below {threshold}")]
    NoTestInputs { threshold: f64 },
    #[error("decoded output requested but decoding is disabled")]
    DecodeDisabled,
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    Version { expected: u32, found: u32 },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable token, used for CLI exit messages and API error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Autodiff(AutodiffError::Shape { .. }) => "shape_mismatch",
            Error::Autodiff(AutodiffError::NonFinite { .. }) | Error::Flow { .. } => "non_finite",
            Error::Autodiff(_) => "autodiff",
            Error::Encoding(e) => e.code(),
            Error::Config(_) => "invalid_config",
            Error::Width { .. } => "width_mismatch",
            Error::SingleClass(_) => "single_class",
            Error::Diverged { .. } => "diverged",
            Error::Metric(_) => "metric_undefined",
            Error::NoTestInputs { .. } => "no_test_inputs",
            Error::DecodeDisabled => "decode_disabled",
            Error::Version { .. } => "checkpoint_version",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
