use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("{what}: singular argument (x = 0)")]
    SingularArgument { what: &'static str },

    #[error(
        "rigid-sphere series did not converge within {max_order} orders \
         (last relative term {last_term:.3e}, tolerance {tol:.1e})"
    )]
    Convergence {
        max_order: usize,
        last_term: f64,
        tol: f64,
    },

    #[error("point lies outside the room: {0}")]
    OutsideRoom(String),

    #[error("impulse response of {len} samples does not fit: {reason}")]
    Length { len: usize, reason: String },

    #[error("missing loudspeaker frequency response for: {}", .0.join(", "))]
    MissingFr(Vec<String>),

    #[error("singular normal equations at bin {bin} (program {program}, channel {channel})")]
    Singular {
        bin: usize,
        program: usize,
        channel: usize,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("corrupt archive {path}: {reason}")]
    Archive { path: PathBuf, reason: String },

    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    /// Wraps the error with a location (stage, tuple indices, ...).
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
