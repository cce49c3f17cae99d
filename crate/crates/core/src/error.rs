use std::path::PathBuf;

/// Errors produced anywhere in the engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Operands with incompatible shapes or out-of-range values.
    #[error("rejected input: {0}")]
    InvalidInput(String),

    /// A configuration constraint was violated (divisibility, layer chain, ...).
    #[error("rejected configuration: {0}")]
    Config(String),

    /// Malformed edge-list or binary input.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A snapshot delta does not apply to its base snapshot.
    #[error("corrupt delta: {0}")]
    CorruptDelta(String),

    /// Workers exchanged an incomplete or inconsistent set of messages.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by an inconsistent configuration or invalid
    /// arguments, as opposed to failures while running.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidInput(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
