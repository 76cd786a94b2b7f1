use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum AmgError {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    Dimension {
        op: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("zero or singular diagonal at index {0}")]
    SingularDiagonal(usize),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("malformed sparse structure: {0}")]
    Structure(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AmgError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(AmgError::InvalidArgument(msg.into()))
}

pub(crate) fn check_dim(op: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(AmgError::Dimension {
            op,
            expected,
            found,
        });
    }
    Ok(())
}
