use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch { what: String, expected: usize, found: usize },

    #[error("design term is the zero matrix")]
    ZeroTerm,

    #[error("stacked U is not full column rank (rank {rank}, {cols} columns)")]
    NotFullColumnRank { rank: usize, cols: usize },

    #[error("terms are not in multi-scenario selector form: {0}")]
    NotMultiScenario(String),

    #[error("terms are not rank-one: term {0} has {1} columns")]
    NotRankOne(usize, usize),

    #[error("{what} = {value} exceeds guard {limit}")]
    Guard { what: &'static str, value: usize, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { what: what.to_string(), expected, found });
    }
    Ok(())
}
