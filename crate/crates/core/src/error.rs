use std::path::PathBuf;

use thiserror::Error;

use crate::trainer::TrainTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("molecule has no ATOM/HETATM records")]
    EmptyMolecule,

    #[error("atom {index} has non-positive radius {radius}")]
    InvalidRadius { index: usize, radius: f64 },

    #[error("atom {index} has a non-finite coordinate")]
    NonFiniteCoordinate { index: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("grid of {points} points exceeds the cap of {cap}")]
    GridTooLarge { points: usize, cap: usize },

    #[error(
        "no lattice point has |phi - {isovalue}| <= {band} at spacing {spacing}; \
         widen the band or refine the grid"
    )]
    EmptyTrainingSet { isovalue: f64, band: f64, spacing: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("training diverged at iteration {iteration}")]
    Divergence {
        iteration: usize,
        trace: Box<TrainTrace>,
    },

    #[error("pruning would remove every neuron")]
    AllPruned,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
