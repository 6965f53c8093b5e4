use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed METAR: {reason} in `{body}`")]
    MalformedMetar { body: String, reason: String },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("schema mismatch: missing column `{0}`")]
    SchemaMismatch(String),

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("flight log does not cover the requested window: {0}")]
    InsufficientHistory(String),

    #[error("no weather observation for {station} at or before {time}")]
    MissingWeather { station: String, time: String },

    #[error("OD pair {origin}-{destination} is not part of the network index")]
    UnknownOdPair { origin: String, destination: String },

    #[error("network index mismatch: expected {expected}, found {found}")]
    IndexMismatch { expected: String, found: String },

    #[error("non-finite activation in {0}")]
    NonFiniteActivation(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    DivergenceDetected { epoch: usize, loss: f64 },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("degenerate record {id}: {reason}")]
    DegenerateRecord { id: String, reason: String },

    #[error("fixed point did not converge for {id}: {reason}")]
    NoConvergence { id: String, reason: String },

    #[error("invalid scenario: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
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
