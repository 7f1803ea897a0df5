use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("detection instability: {0}")]
    DetectionInstability(String),
    #[error("impossible template count: {0}")]
    Impossible(String),
    #[error("inconsistent template system: {0}")]
    Inconsistent(String),
    #[error("compatibility violation: {0}")]
    Compatibility(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("internal consistency: {0}")]
    Internal(String),
    #[error("classification gap: {0}")]
    ClassificationGap(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("state error: {0}")]
    State(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
