use std::path::PathBuf;

/// Errors raised by the joint SBM library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("CSV error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("edge ({u}, {v}) references a node outside 0..{n_nodes}")]
    EndpointOutOfRange { u: usize, v: usize, n_nodes: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("dataset must contain at least one graph")]
    EmptyDataset,
    #[error("graph must contain at least one node")]
    EmptyGraph,
    #[error("invalid number of communities {k}: {reason}")]
    InvalidK { k: usize, reason: String },
    #[error("label {label} out of range for k = {k}")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("connectivity is rank deficient (min |eigenvalue| {0:e})")]
    RankDeficient(f64),
    #[error("community {0} has no members")]
    EmptyCluster(usize),
    #[error("exhaustive permutation search refused for k = {k} (k! candidates); maximum is {max}")]
    PermutationSearchTooLarge { k: usize, max: usize },
    #[error("eigensolver did not converge after {matvecs} matrix-vector products")]
    NotConverged { matvecs: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by bad input or violated preconditions, as
    /// opposed to numerical or environment failures.
    pub fn is_usage(&self) -> bool {
        !matches!(
            self,
            Error::NotConverged { .. } | Error::RankDeficient(_)
        )
    }
}
