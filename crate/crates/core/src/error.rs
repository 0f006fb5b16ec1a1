use thiserror::Error;

use crate::expr::ExprError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Expression(#[from] ExprError),

    #[error("unknown catalog problem `{0}`")]
    UnknownProblem(String),

    #[error("regression ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("certificate: {0}")]
    Certificate(String),

    #[error("too few residuals: need at least {needed}, got {got}")]
    TooFewResiduals { needed: usize, got: usize },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_index(index: usize, limit: usize) -> Result<()> {
    if index > limit {
        Err(Error::IndexOutOfRange { index, limit })
    } else {
        Ok(())
    }
}
