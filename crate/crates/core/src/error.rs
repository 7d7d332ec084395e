use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("line {line}: self-loop on node {node}")]
    SelfLoop { line: usize, node: usize },

    #[error("line {line}: edge weight must be positive and finite, got {weight}")]
    BadWeight { line: usize, weight: f64 },

    #[error("node id {id} exceeds the declared node count {n}")]
    IdOverflow { id: usize, n: usize },

    #[error("node {node} has conflicting labels {first} and {second}")]
    ConflictingLabel {
        node: usize,
        first: usize,
        second: usize,
    },

    #[error("class {class} out of range for k = {k}")]
    ClassOutOfRange { class: usize, k: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid compatibility matrix: {0}")]
    InvalidCompatibility(String),

    #[error("power iteration did not converge after {iterations} iterations (best estimate {estimate})")]
    NoConvergence { iterations: usize, estimate: f64 },

    #[error("propagation diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("graph too large for the dense path: n = {n} exceeds cap {cap}")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("no labeled nodes")]
    NoLabels,

    #[error("non-finite energy during optimization at iteration {iteration}")]
    NonFiniteEnergy { iteration: usize },

    #[error("infeasible generator spec: {0}")]
    Infeasible(String),

    #[error("infeasible heuristic pattern: {0}")]
    InfeasiblePattern(String),

    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
