//! Error type shared across the crate.

use std::fmt;
use std::io;

/// Errors produced by dataset ingestion, solvers, and attack strategies.
#[derive(Debug)]
pub enum Error {
    /// Schema file or schema/data mismatch problems (missing column,
    /// unknown category label, duplicate names).
    Schema(String),
    /// A cell failed to parse; carries the 1-based data row and column name.
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    /// Invalid argument (sizes, rates, empty grids, ...).
    Argument(String),
    /// The stationarity system is singular (lambda = 0 on rank-deficient data).
    RankDeficient(String),
    /// Non-finite values encountered where finite reals are required.
    Numeric(String),
    /// An `AttackState` was observed out of sync with its poison set.
    StaleState(String),
    /// Brute-force enumeration would exceed the configured budget.
    EnumerationBudget { required: u128, budget: u128 },
    /// Underlying I/O failure.
    Io(io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Schema(msg) => write!(f, "schema error: {msg}"),
            Error::Parse {
                row,
                column,
                message,
            } => write!(f, "parse error at row {row}, column '{column}': {message}"),
            Error::Argument(msg) => write!(f, "argument error: {msg}"),
            Error::RankDeficient(msg) => write!(f, "rank-deficiency error: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric error: {msg}"),
            Error::StaleState(msg) => write!(f, "stale state: {msg}"),
            Error::EnumerationBudget { required, budget } => write!(
                f,
                "enumeration budget exceeded: instance requires {required} evaluations, budget is {budget}"
            ),
            Error::Io(err) => write!(f, "i/o error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(err: io::Error) -> Self {
        Error::Io(err)
    }
}
