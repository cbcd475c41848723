use thiserror::Error;

/// Errors shared across the structuring pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("unsound model: {0}")]
    Unsound(String),
    #[error("{what}: guard exceeded (limit {limit})")]
    Guard { what: &'static str, limit: usize },
    #[error("unknown node: {0}")]
    UnknownNode(String),
    #[error("not a configuration: violating pair ({0}, {1})")]
    NotAConfiguration(String, String),
    #[error("net not mappable to a process model: {0}")]
    NotMappable(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
