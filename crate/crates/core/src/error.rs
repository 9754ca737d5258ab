use dflp_engine::EngineError;
use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {}", format_violations(.0))]
    Validation(Vec<Violation>),
    #[error("infeasible policy: {0}")]
    InfeasiblePolicy(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("unsupported case: {0}")]
    Unsupported(String),
    #[error("enumeration budget exceeded: {needed} policies needed, limit {limit}")]
    Size { needed: u128, limit: u128 },
    #[error("solver error: {0}")]
    Engine(#[from] EngineError),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
