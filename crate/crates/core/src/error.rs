use thiserror::Error;

use crate::simplex::LpError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("lp engine: {0}")]
    Lp(#[from] LpError),
    #[error("instance too large for enumeration: n = {n} exceeds cap {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("cannot decode integer point: {0}")]
    Decode(String),
    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
