//! Command-line entry points, file formats, and run reports.

pub mod commands;
pub mod config;
pub mod hrmx;
pub mod report;
pub mod store;

pub use commands::{CommandError, RankSelection, DEFAULT_MEM_BUDGET};
pub use config::{BenchmarkConfig, TrainMode};
