use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// Variants are grouped by how a caller is expected to react: bad input
/// (`Validation`, `Schema`, `Decode`, `Shape`, `Pairing`, `Consistency`),
/// numerical failure (`Divergence`), and environment failure (`Io`).
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("decode error at byte {offset}: {message}")]
    Decode { offset: usize, message: String },

    #[error("shape error at layer {layer}: {message}")]
    Shape { layer: usize, message: String },

    #[error("training error: {0}")]
    Training(String),

    #[error("training diverged at {stage} {index}{context}: loss = {loss}")]
    Divergence {
        stage: &'static str,
        index: usize,
        loss: f64,
        context: String,
    },

    #[error("pairing error: {0}")]
    Pairing(String),

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for failures caused by the numerics rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Divergence { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
