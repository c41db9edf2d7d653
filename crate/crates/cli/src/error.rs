use std::path::Path;

use nercc_core::{CodecError, ModelError, SimError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("cannot load model: {0}")]
    ModelLoad(#[from] ModelError),
    #[error("cannot load dataset: {0}")]
    Dataset(String),
    #[error("cannot access {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("codec: {0}")]
    Codec(#[from] CodecError),
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
    #[error("metrics: {0}")]
    Metrics(#[from] nercc_core::metrics::MetricsError),
    #[error("triangle bound violated: l2_loss {l2_loss} > term1 + term2 = {bound} (scheme {scheme}, trial {trial})")]
    TriangleViolated {
        scheme: String,
        trial: usize,
        l2_loss: f64,
        bound: f64,
    },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("no rows to plot")]
    EmptyInput,
}

impl ExperimentError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        ExperimentError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, ExperimentError>;
