use std::fmt;

/// Errors produced by the tracking-lab library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Non-finite or dimensionally inconsistent input.
    InvalidInput(String),
    /// Input outside the mathematical domain of an operation (e.g. vx <= 0).
    Domain(String),
    /// A parameter perturbation would violate the vehicle invariants.
    InvalidPerturbation(String),
    /// QP constraint set is empty.
    Infeasible(String),
    /// Training data contains non-finite or malformed entries.
    InvalidData(String),
    /// Argument outside the accepted range of an operation.
    InvalidArgument(String),
    /// File or parse failure, with context.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::InvalidPerturbation(msg) => write!(f, "invalid perturbation: {msg}"),
            Error::Infeasible(msg) => write!(f, "infeasible problem: {msg}"),
            Error::InvalidData(msg) => write!(f, "invalid data: {msg}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
