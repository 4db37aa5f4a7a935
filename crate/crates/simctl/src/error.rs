use std::io;
use std::path::PathBuf;

use simctl_core::analysis::AnalysisError;
use simctl_core::forecast::ForecastError;
use simctl_core::simulator::SimError;
use simctl_core::strategy::StrategyError;
use simctl_core::ModelError;
use thiserror::Error;

use crate::ingest::IngestError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const INTERNAL: i32 = 4;
}

#[derive(Debug, Error)]
pub enum AppError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("report: {0}")]
    Report(String),
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) | AppError::Model(_) => exit::CONFIG,
            AppError::Sim(SimError::InvariantBreach { .. }) => exit::INTERNAL,
            AppError::Analysis(AnalysisError::Sim(SimError::InvariantBreach { .. })) => exit::INTERNAL,
            AppError::Sim(SimError::Model(_)) | AppError::Strategy(StrategyError::Model(_)) => exit::CONFIG,
            AppError::Io { .. }
            | AppError::Ingest(_)
            | AppError::Forecast(_)
            | AppError::Strategy(_)
            | AppError::Sim(_)
            | AppError::Analysis(_)
            | AppError::Report(_) => exit::DATA,
        }
    }
}
