use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum SugarError {
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("parse error at row {row}, column {col}: {message}")]
    Parse {
        row: usize,
        col: usize,
        message: String,
    },

    #[error("ragged csv: row {row} has {found} fields, expected {expected}")]
    Ragged {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("degenerate bandwidth at point {index}: scale is zero (duplicate points?)")]
    DegenerateBandwidth { index: usize },

    #[error("zero row sum at index {index}: point is disconnected from every reference")]
    ZeroRowSum { index: usize },

    #[error("matrix is not symmetric (max asymmetry {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("matrix {index} is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPsd { index: usize, eigenvalue: f64 },

    #[error("sugar step {step} ({name}) failed: {source}")]
    Step {
        step: u8,
        name: &'static str,
        #[source]
        source: Box<SugarError>,
    },
}

pub type Result<T, E = SugarError> = std::result::Result<T, E>;

impl SugarError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        SugarError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            SugarError::InvalidData(_) => "invalid_data",
            SugarError::InvalidParameter { .. } => "invalid_parameter",
            SugarError::DimensionMismatch(_) => "dimension_mismatch",
            SugarError::Parse { .. } => "parse",
            SugarError::Ragged { .. } => "ragged",
            SugarError::Io { .. } => "io",
            SugarError::DegenerateBandwidth { .. } => "degenerate_bandwidth",
            SugarError::ZeroRowSum { .. } => "zero_row_sum",
            SugarError::NotSymmetric { .. } => "not_symmetric",
            SugarError::NotPsd { .. } => "not_psd",
            SugarError::Step { .. } => "step",
        }
    }

    /// Name of the pipeline step that failed, when the error came out of one.
    pub fn step_name(&self) -> Option<&'static str> {
        match self {
            SugarError::Step { name, .. } => Some(name),
            _ => None,
        }
    }
}
