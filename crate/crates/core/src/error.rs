use thiserror::Error;

/// Errors produced by the engine, grouped by how the caller should react.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes of the operands do not line up (channel counts, spatial dims).
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A knob or parameter combination is invalid before any data is touched.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Input data violates a precondition (range, rank, degeneracy).
    #[error("validation failed: {0}")]
    Validation(String),

    /// A file could not be read, or its contents do not follow the expected
    /// layout (weight bundles, images).
    #[error("input format error: {0}")]
    Format(String),

    /// An iterative kernel failed to converge or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 config, 3 input/format, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Dimension(_) | Error::Validation(_) | Error::Format(_) => 3,
            Error::Numerical(_) => 4,
        }
    }

    pub(crate) fn with_stage(self, stage: &str) -> Error {
        match self {
            Error::Dimension(m) => Error::Dimension(format!("{stage}: {m}")),
            Error::Config(m) => Error::Config(format!("{stage}: {m}")),
            Error::Validation(m) => Error::Validation(format!("{stage}: {m}")),
            Error::Format(m) => Error::Format(format!("{stage}: {m}")),
            Error::Numerical(m) => Error::Numerical(format!("{stage}: {m}")),
        }
    }
}
