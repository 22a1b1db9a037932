use std::path::PathBuf;

use thiserror::Error;

/// Identifies a user or item node in error messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Node {
    User(u32),
    Item(u32),
}

impl std::fmt::Display for Node {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Node::User(u) => write!(f, "user {u}"),
            Node::Item(i) => write!(f, "item {i}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("record {record}: ({user}, {item}) out of range for {n_users} users x {n_items} items")]
    IndexOutOfRange {
        record: usize,
        user: u32,
        item: u32,
        n_users: usize,
        n_items: usize,
    },
    #[error("edge weight {value} at edge {edge} is outside [0, 1]")]
    InvalidWeight { edge: usize, value: f64 },
    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{0} is empty")]
    Empty(String),
    #[error("user {user} has interacted with every item; cannot sample a negative")]
    NoNegative { user: u32 },
    #[error("non-finite value in propagation layer {layer}")]
    NonFiniteLayer { layer: usize },
    #[error("non-finite gradient in parameter `{name}`")]
    NonFiniteGradient { name: String },
    #[error("non-finite loss in {phase} (epoch {epoch}, batch {batch})")]
    NonFiniteLoss {
        phase: &'static str,
        epoch: usize,
        batch: usize,
    },
    #[error("zero-norm embedding for {0}; cosine similarity undefined")]
    ZeroNorm(Node),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    RawIo(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
