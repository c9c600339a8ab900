use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EdpError {
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("degenerate cut: {0}")]
    DegenerateCut(String),
    #[error("exact oracle refused: {boundary} boundary edges exceed the limit of {limit}")]
    OracleTooLarge { boundary: usize, limit: usize },
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("stochastic failure: {0}")]
    Stochastic(String),
}

impl EdpError {
    /// Process exit status used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            EdpError::Verification(_) | EdpError::Invariant(_) => 2,
            EdpError::Stochastic(_) => 3,
            EdpError::Malformed(_)
            | EdpError::Precondition(_)
            | EdpError::DegenerateCut(_)
            | EdpError::OracleTooLarge { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, EdpError>;

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($fmt:tt)+) => {
        if !$cond {
            return Err($crate::error::EdpError::$variant(format!($($fmt)+)));
        }
    };
}
pub(crate) use ensure;
