use thiserror::Error;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, MrpError>;

#[derive(Debug, Error)]
pub enum MrpError {
    #[error("invalid MRP: {}", format_report(.0))]
    Validation(Vec<Violation>),

    #[error("singular linear system")]
    SingularSystem,

    #[error("path exceeded the maximum length guard of {0} states")]
    PathLengthExceeded(usize),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("invalid statistic: {0}")]
    InvalidStatistic(String),

    #[error("no consistent decomposition: {0}")]
    Infeasible(String),

    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),

    #[error("empty sample")]
    EmptySample,

    #[error("no observed paths")]
    NoData,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

fn format_report(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
