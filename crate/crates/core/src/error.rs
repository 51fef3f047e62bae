use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    /// Input matrix failed `validate_stochastic`.
    #[error("{0}")]
    Validation(String),

    /// Solver failure, singular system or residual above its gate.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("series did not converge after {terms} terms (last term norm {last_norm:e})")]
    Convergence { terms: usize, last_norm: f64 },

    #[error("complex main eigenvalue {re} {im:+}i inside the selected window")]
    ComplexMainEigenvalue { re: f64, im: f64 },

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("inconsistent right-hand side: omega* b = {residual:e}")]
    Inconsistent { residual: f64 },

    #[error("parse error in {}: line {line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 usage, 3 numeric/degeneracy, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) => 2,
            Error::Io { .. } | Error::Parse { .. } | Error::Json(_) => 4,
            _ => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::Parameter(_) => "parameter",
            Error::Validation(_) => "validation",
            Error::Numeric(_) => "numeric",
            Error::Convergence { .. } => "convergence",
            Error::ComplexMainEigenvalue { .. } => "complex_main_eigenvalue",
            Error::Degenerate(_) => "degenerate",
            Error::Inconsistent { .. } => "inconsistent",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
