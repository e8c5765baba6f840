use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("marginal `{which}` is not a probability vector: {reason}")]
    InfeasibleMarginals { which: &'static str, reason: String },

    #[error("cost matrix is {rows}x{cols} but marginals have lengths {n} and {m}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        n: usize,
        m: usize,
    },

    #[error("cost matrix entry ({row}, {col}) is negative or not finite")]
    InvalidCost { row: usize, col: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("sinkhorn did not converge: marginal violation {violation:e} after {iterations} iterations")]
    NonConvergence { violation: f64, iterations: usize },

    #[error("feature dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("embeddings come from different references: {0}")]
    ReferenceMismatch(String),

    #[error("no graphs with label {label} on the {side} side")]
    EmptyClass { side: &'static str, label: usize },

    #[error("all weights are zero")]
    AllZeroWeights,

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("dataset has {0} graphs, need at least 5 to split")]
    DatasetTooSmall(usize),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("edge endpoint {node} (line {line}) belongs to no graph")]
    DanglingEdge { node: usize, line: usize },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("dataset hash mismatch: file records {expected}, dataset is {actual}")]
    HashMismatch { expected: String, actual: String },

    #[error("cache file is corrupt: {0}")]
    CorruptCache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
