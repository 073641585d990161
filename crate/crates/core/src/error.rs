//! Crate-wide error type.

use std::fmt;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// Invalid configuration value (bad bounds, rates outside [0,1], ...).
    Config(String),
    /// A caller broke an operation contract (length mismatch, bad role, ...).
    Contract(String),
    /// Input sequence longer than the model's `max_positions`.
    Capacity { needed: usize, max: usize },
    /// Token id outside the model vocabulary.
    Vocab { id: u32, vocab_size: usize },
    /// Dataset too small to split as requested.
    Split(String),
    /// Malformed data file line.
    Parse { path: PathBuf, line: usize, message: String },
    /// Filesystem error with the path that produced it.
    Io { path: PathBuf, source: std::io::Error },
    /// A pipeline stage is missing one of its declared inputs.
    Dependency { stage: String, missing: String, run_first: String },
    /// Training produced a non-finite parameter or loss.
    Divergence { step: usize, detail: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(msg) => write!(f, "configuration error: {msg}"),
            Self::Contract(msg) => write!(f, "contract violation: {msg}"),
            Self::Capacity { needed, max } => {
                write!(f, "capacity error: input needs {needed} positions, model allows {max}")
            }
            Self::Vocab { id, vocab_size } => {
                write!(f, "vocab error: token id {id} outside vocabulary of size {vocab_size}")
            }
            Self::Split(msg) => write!(f, "split error: {msg}"),
            Self::Parse { path, line, message } => {
                write!(f, "parse error in {} line {line}: {message}", path.display())
            }
            Self::Io { path, source } => write!(f, "io error on {}: {source}", path.display()),
            Self::Dependency { stage, missing, run_first } => write!(
                f,
                "dependency error: stage `{stage}` needs `{missing}`; run `{run_first}` first"
            ),
            Self::Divergence { step, detail } => {
                write!(f, "divergence at step {step}: {detail}")
            }
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// Process exit code used by the CLI (0 success, 2 dependency, 3 divergence).
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Dependency { .. } => 2,
            Self::Divergence { .. } => 3,
            _ => 1,
        }
    }
}
