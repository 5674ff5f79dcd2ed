use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied an invalid argument or configuration value.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// Cosine loss evaluated at a (numerically) zero prediction vector.
    #[error("degenerate prediction: norm {0:e} below threshold")]
    DegeneratePrediction(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
