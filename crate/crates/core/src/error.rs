use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("hub graph is disconnected ({components} components over {hubs} hubs)")]
    Disconnected { components: usize, hubs: usize },

    #[error("hub matrix rejected: {0}")]
    InvalidHubMatrix(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("eigensolver: {0}")]
    Eigen(String),

    #[error("invalid objective: {0}")]
    Objective(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("simulation diverged at step {step}: {reason}")]
    Divergence { step: usize, reason: String },

    #[error("bound precondition violated: {0}")]
    Bound(String),

    #[error("idx file {path}: {reason}")]
    Idx { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
