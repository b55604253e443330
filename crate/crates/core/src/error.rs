use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("inconsistent problem: {0}")]
    Inconsistent(String),
    #[error("degree error: {0}")]
    Degree(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("integration by parts failed: {0}")]
    Reduction(String),
    #[error("unsupported constraint: {0}")]
    Unsupported(String),
    #[error("bracket error: {0}")]
    Bracket(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
