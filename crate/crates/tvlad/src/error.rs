//! Crate-wide error type with stable exit-code categories.

use thiserror::Error;

/// Errors produced by the library.
///
/// Each variant maps to a stable CLI exit-code category via
/// [`Error::exit_category`]: configuration (1), data (2), numeric (3).
/// Anything else (panics, I/O at the binary level) is internal (4).
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The evaluation point lies outside the kernel-admissible interval.
    #[error("u0 = {u0} outside admissible [{lo:.6}, {hi:.6}]; restrict u0 to [C_K*h, 1 - C_K*h] or enable the truncate boundary policy")]
    Boundary { u0: f64, lo: f64, hi: f64 },
}

impl Error {
    /// Stable exit-code category: 1 config, 2 data, 3 numeric.
    pub fn exit_category(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Boundary { .. } => 1,
            Error::Data(_) => 2,
            Error::Numeric(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
