use thiserror::Error;

/// Unified error for grid, kernel, solver and bridge operations.
///
/// Each variant maps to a fixed bridge status code (`status_code`), so the
/// same error value drives both `Result` propagation and the numeric
/// `StatusResult` surface: 0 success, 1 state, 2 parse, 3 eval, 4
/// type/dimension, 5 reference, 6 i/o.
#[derive(Debug, Error)]
pub enum Error {
    #[error("state error: {0}")]
    State(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("eval error: {0}")]
    Eval(String),
    #[error("type error: {0}")]
    TypeDim(String),
    #[error("reference error: {0}")]
    Reference(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn status_code(&self) -> i32 {
        match self {
            Error::State(_) => 1,
            Error::Parse(_) => 2,
            Error::Eval(_) => 3,
            Error::TypeDim(_) => 4,
            Error::Reference(_) => 5,
            Error::Io(_) => 6,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
