use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter or argument value.
    #[error("invalid parameter: {0}")]
    Param(String),
    /// Malformed input data (IDX files, graph dumps, CSV).
    #[error("parse error: {0}")]
    Parse(String),
    /// Bad experiment configuration (unknown key, range violation, missing key).
    #[error("configuration error: {0}")]
    Config(String),
    /// Dimension mismatch between tensors, datasets, or masks.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// Numerical failure (domain error, divergence).
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 usage, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Param(_) | Error::Config(_) => 2,
            Error::Parse(_) | Error::Io(_) => 3,
            Error::Shape(_) | Error::Numerical(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
