use std::fmt;

/// Crate-wide error type.
#[derive(Debug)]
pub enum Error {
    /// Two fields with incompatible grids were combined.
    GridMismatch { expected: usize, found: usize },
    /// An operation received or produced non-finite values.
    NonFinite(&'static str),
    /// A solver state is flagged as blown up and cannot be stepped.
    BlownUp,
    /// A parameter was outside its admissible range.
    InvalidParameter(String),
    /// An action index outside the action space.
    InvalidAction(usize),
    /// A variant that needs reference snapshots was run without them.
    MissingReference(String),
    /// Malformed or inconsistent run configuration.
    Config(String),
    /// Snapshot or checkpoint file could not be decoded.
    Format(String),
    Io(std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::GridMismatch { expected, found } => {
                write!(f, "grid mismatch: expected n={expected}, found n={found}")
            }
            Error::NonFinite(what) => write!(f, "non-finite values in {what}"),
            Error::BlownUp => write!(f, "solver state is blown up"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::InvalidAction(idx) => write!(f, "action index {idx} out of range"),
            Error::MissingReference(msg) => write!(f, "missing reference data: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Format(msg) => write!(f, "format error: {msg}"),
            Error::Io(err) => write!(f, "io error: {err}"),
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

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}
