use thiserror::Error;

/// Errors produced by the library.
///
/// `Validation`, `SampleOverflow` and `DimensionMismatch` are caller mistakes (bad parameters,
/// malformed spec files); the remaining variants are runtime failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    /// A bound that does not fit the supported sample range.
    #[error("sample bound exceeds {0}")]
    SampleOverflow(u64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("malformed spec at line {line}, column {column}: {message}")]
    Spec {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for errors caused by invalid user input rather than the runtime.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_) | Error::SampleOverflow(_) | Error::DimensionMismatch { .. } | Error::Spec { .. }
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        use serde_json::error::Category;
        match e.classify() {
            Category::Syntax | Category::Data | Category::Eof => Error::Spec {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            },
            Category::Io => Error::Json(e),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
