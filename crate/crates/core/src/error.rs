use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, attribute `{attribute}`: {message}")]
    InvalidValue {
        row: usize,
        attribute: String,
        message: String,
    },

    #[error("missing column `{0}` in data header")]
    MissingColumn(String),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("empty group: {0}")]
    EmptyGroup(String),

    #[error("invalid probability mass function: {0}")]
    InvalidPmf(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("missing artifact {path}; run `fairgan {command}` first")]
    MissingArtifact { path: PathBuf, command: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable identifier of the error class, for machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidValue { .. } => "invalid_value",
            Error::MissingColumn(_) => "missing_column",
            Error::Schema(_) => "schema",
            Error::EmptyGroup(_) => "empty_group",
            Error::InvalidPmf(_) => "invalid_pmf",
            Error::Config(_) => "config",
            Error::Degenerate(_) => "degenerate",
            Error::MissingArtifact { .. } => "missing_artifact",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn dims(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            found,
        }
    }
}
