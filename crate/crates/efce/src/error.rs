use std::fmt;

/// Errors surfaced by game construction, file parsing, and the solvers.
#[derive(Debug)]
pub enum Error {
    /// A file did not conform to one of the text formats. Carries the
    /// 1-based line number when one is available.
    Parse { line: usize, message: String },
    /// The game tree violates a structural requirement (orphan node,
    /// duplicate child, straddling infoset, ...).
    Structure(String),
    /// A caller-supplied argument is outside its contract.
    InvalidInput(String),
    /// The LP solver could not produce a usable solution.
    Solve(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            Error::Structure(m) => write!(f, "structural error: {m}"),
            Error::InvalidInput(m) => write!(f, "invalid input: {m}"),
            Error::Solve(m) => write!(f, "solver error: {m}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub(crate) fn structure(msg: impl Into<String>) -> Error {
    Error::Structure(msg.into())
}
