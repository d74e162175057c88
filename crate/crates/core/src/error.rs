//! Error type shared by every module in the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
///
/// The CLI maps these onto process exit codes, so variants are grouped by
/// their nature: configuration problems, data problems, and numeric failures.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric routine received a non-finite or otherwise unusable input.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Matrix or batch dimensions do not conform.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A class label is outside the valid range for the problem.
    #[error("invalid label {label}: expected a class index in [0, {num_classes})")]
    InvalidLabel { label: usize, num_classes: usize },

    /// A configuration value violates its documented contract.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A loss denominator collapsed below the degeneracy threshold.
    #[error("numeric degeneracy: {0}")]
    NumericDegeneracy(String),

    /// Training produced a non-finite loss or gradient.
    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    /// A metric is undefined for the given inputs (e.g. single-class AUROC).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// A data file failed to parse; `line` is 1-based and includes the header.
    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    /// A binary artifact has the wrong magic bytes or an inconsistent header.
    #[error("bad file format: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
