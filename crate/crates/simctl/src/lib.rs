//! File formats, synthetic fleets, reports and the command-line front end for
//! the forecast-based PV-battery charging strategy in `simctl-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod synth;

pub use error::AppError;
