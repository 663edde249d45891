use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("could not generate connected graph after {attempts} attempts")]
    DisconnectedGraph { attempts: usize },

    #[error("zero degree at node {node}: normalized Laplacian undefined")]
    ZeroDegree { node: usize },

    #[error("non-finite gradient in tensor `{tensor}` at index {index}")]
    NonFiniteGradient { tensor: String, index: usize },

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("truncated payload: {0}")]
    Truncated(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

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
