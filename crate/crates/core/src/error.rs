//! Error type shared by every module.

use thiserror::Error;

/// Failure modes of the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("unsupported order k={0} (estimator supports k <= 4, variance k in {{1, 2}})")]
    UnsupportedOrder(usize),
    #[error("weight evaluation failed: {0}")]
    Evaluation(String),
    #[error("singular filter: {0}")]
    SingularFilter(String),
    #[error("model is not causal: {0}")]
    NonCausal(String),
    #[error("unknown tag: {0}")]
    UnknownTag(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Stable short code used on the command line.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Input(_) => "E_INPUT",
            Error::UnsupportedOrder(_) => "E_ORDER",
            Error::Evaluation(_) => "E_EVAL",
            Error::SingularFilter(_) => "E_SINGULAR",
            Error::NonCausal(_) => "E_CAUSAL",
            Error::UnknownTag(_) => "E_TAG",
            Error::Config(_) => "E_CONFIG",
            Error::Degenerate(_) => "E_DEGENERATE",
            Error::Numerical(_) => "E_NUMERIC",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
