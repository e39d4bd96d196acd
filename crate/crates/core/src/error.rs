use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("node {node} out of range for a digraph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("self-loop on node {0} is not allowed")]
    SelfLoop(usize),

    #[error("duplicate edge {src} -> {dst}")]
    DuplicateEdge { src: usize, dst: usize },

    #[error("a digraph needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),

    #[error("edge probability {0} is outside [0, 1]")]
    InvalidProbability(f64),

    #[error("digraph is not strongly connected")]
    NotStronglyConnected,

    #[error("node {0} has no out-neighbors")]
    NoOutNeighbors(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("matrix of order {n} exceeds the dense eigensolver cap of {cap}")]
    MatrixTooLarge { n: usize, cap: usize },

    #[error("eigenvalue iteration did not converge after {0} sweeps")]
    EigenNotConverged(usize),

    #[error("convergence rate undefined: {0}")]
    RateUndefined(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("trace decays too slowly to estimate a rate (no decay)")]
    NoDecay,

    #[error("malformed trace: {0}")]
    Trace(String),

    #[error("config: {0}")]
    Config(String),

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
}
