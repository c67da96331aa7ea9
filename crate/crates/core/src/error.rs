use std::path::PathBuf;

use crate::geograph::{NodeId, NodeKind};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),

    #[error("unknown node id {0}")]
    UnknownNode(NodeId),

    #[error("subgraph center {id} is a {kind} node, expected NWP")]
    CenterNotNwp { id: NodeId, kind: NodeKind },

    #[error("hop count must be at least 1")]
    ZeroHops,

    #[error("{kind} node expects {expected} attributes, got {got}")]
    AttributeCount {
        kind: NodeKind,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid field spec: {0}")]
    InvalidSpec(String),

    #[error("invalid model config: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown node kind {0:?}")]
    UnknownKind(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("cannot occlude the subgraph center {0}")]
    OccludeCenter(NodeId),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }
}
