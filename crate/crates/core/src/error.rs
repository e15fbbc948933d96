use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("label {label} out of range for {classes} classes (sample {sample})")]
    BadLabel {
        label: usize,
        classes: usize,
        sample: usize,
    },

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error("degenerate vector: {0}")]
    DegenerateVector(String),

    #[error("out of domain: {0}")]
    OutOfDomain(String),

    #[error("format error in {file}: {field}")]
    Format { file: String, field: String },

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("training diverged at iteration {iteration}: {detail}")]
    Diverged { iteration: u64, detail: String },

    #[error("finite-difference probe failed at element {index}: {detail}")]
    Probe { index: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
