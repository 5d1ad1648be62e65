//! Error types shared across the pipeline.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Ingestion schema does not match the data (missing columns, unknown
    /// variables, inconsistent variable sets across members).
    #[error("schema error: {0}")]
    Schema(String),

    /// A concrete bad cell in the input data.
    #[error("ingestion error in member '{member}', row {row}, column '{column}': {reason}")]
    Ingestion {
        member: String,
        row: usize,
        column: String,
        reason: String,
    },

    /// Members disagree on shape where they must not.
    #[error("shape error: {0}")]
    Shape(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("split error: {0}")]
    Split(String),

    /// Invalid configuration values (lag ranges, alpha levels, grids).
    #[error("config error: {0}")]
    Config(String),

    /// A statistical test was asked for more degrees of freedom than the
    /// data provides.
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    /// Numerically rank-deficient conditioning or design matrix.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("discovery error: {0}")]
    Discovery(String),

    /// Regression with fewer samples than features.
    #[error("underdetermined system: {0}")]
    Underdetermined(String),

    /// Model applied to a sample matrix with the wrong columns.
    #[error("feature mismatch: {0}")]
    FeatureMismatch(String),

    /// Synthetic system rejected (e.g. unstable).
    #[error("generation error: {0}")]
    Generation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad configuration or malformed input,
    /// as opposed to runtime failures. The CLI maps these to exit code 2.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Schema(_)
                | Error::Ingestion { .. }
                | Error::Shape(_)
                | Error::Config(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}
