use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed row {row}: {message}")]
    MalformedRow { row: usize, message: String },

    #[error("non-numeric covariate '{column}' at row {row}")]
    NonNumeric { column: String, row: usize },

    #[error("missing covariate '{column}' at row {row}")]
    MissingCovariate { column: String, row: usize },

    #[error("unknown group value '{value}' at row {row}")]
    UnknownGroup { value: String, row: usize },

    #[error("invalid outcome '{value}' in column '{column}' at row {row}")]
    InvalidOutcome { value: String, column: String, row: usize },

    #[error("missing column '{0}'")]
    MissingColumn(String),

    #[error("unknown feature '{0}'")]
    UnknownFeature(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("record {row} has no outcome label")]
    Unlabeled { row: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training data contains a single outcome class")]
    SingleClass,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coupling of {entries} entries exceeds the memory budget of {budget}; use batched_fit_map")]
    BudgetExceeded { entries: usize, budget: usize },

    #[error("too few pairs to smooth: {got} < {min}")]
    TooFewPairs { got: usize, min: usize },

    #[error("need {needed} records for batching but only {available} available")]
    InsufficientRecords { needed: usize, available: usize },

    #[error("invalid label {0}; labels are 0 or 1")]
    InvalidLabel(u8),

    #[error("calibration set is empty")]
    EmptyCalibration,

    #[error("confusion table {axis} for label {label} is empty")]
    EmptyMargin { axis: &'static str, label: u8 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("counterfactual outcomes are unavailable: Y* is never observed in real data, only in simulation")]
    CounterfactualUnavailable,

    #[error("baseline group empty")]
    EmptyBaseline,

    #[error("missing artifact {path}: run {command} first")]
    MissingArtifact { path: PathBuf, command: &'static str },

    #[error("artifact chain mismatch: {0}")]
    ArtifactMismatch(String),

    #[error("artifact format error in {path}: {message}")]
    ArtifactFormat { path: PathBuf, message: String },
}

impl Error {
    /// Stable snake-case identifier for machine consumers.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::MalformedRow { .. } => "malformed_row",
            Error::NonNumeric { .. } => "non_numeric",
            Error::MissingCovariate { .. } => "missing_covariate",
            Error::UnknownGroup { .. } => "unknown_group",
            Error::InvalidOutcome { .. } => "invalid_outcome",
            Error::MissingColumn(_) => "missing_column",
            Error::UnknownFeature(_) => "unknown_feature",
            Error::EmptyDataset => "empty_dataset",
            Error::InvalidSplit(_) => "invalid_split",
            Error::Unlabeled { .. } => "unlabeled",
            Error::InvalidConfig(_) => "invalid_config",
            Error::SingleClass => "single_class",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::BudgetExceeded { .. } => "budget_exceeded",
            Error::TooFewPairs { .. } => "too_few_pairs",
            Error::InsufficientRecords { .. } => "insufficient_records",
            Error::InvalidLabel(_) => "invalid_label",
            Error::EmptyCalibration => "empty_calibration",
            Error::EmptyMargin { .. } => "empty_margin",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::CounterfactualUnavailable => "counterfactual_unavailable",
            Error::EmptyBaseline => "empty_baseline",
            Error::MissingArtifact { .. } => "missing_artifact",
            Error::ArtifactMismatch(_) => "artifact_mismatch",
            Error::ArtifactFormat { .. } => "artifact_format",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
