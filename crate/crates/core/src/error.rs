use std::path::PathBuf;

use thiserror::Error;

use crate::models::LinearModel;

/// Errors produced anywhere in the forecasting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("point ({lat}, {lon}) lies outside the tile grid")]
    OutOfExtent { lat: f64, lon: f64 },

    #[error("timestamp {timestamp} precedes the window epoch {epoch}")]
    BeforeEpoch { timestamp: i64, epoch: i64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("undefined statistic: {0}")]
    Undefined(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("temporal leakage: {0}")]
    Leakage(String),

    #[error("coordinate descent did not converge after {iterations} sweeps (last change {last_change:e})")]
    NotConverged {
        iterations: usize,
        last_change: f64,
        model: Box<LinearModel>,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("missing input file {}", .0.display())]
    MissingInput(PathBuf),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
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
