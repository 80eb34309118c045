//! Benchmark harness for the CoMadOut detectors: configuration, the
//! dataset × variant × ratio × seed runner, rank aggregation and report
//! rendering.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{DatasetSpec, Format, Metric, PAtNMode, RunConfig};
pub use report::{emit_report, read_report_csv, render_csv, render_markdown, ReportRow};
pub use runner::{
    grid_search, run_benchmark, run_on, scale_sweep, BenchmarkReport, CellKey, RatioSel, Summary,
};

/// A configuration that cannot be run. Maps to exit code 1.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> Self {
        ConfigError(msg.into())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] comadout::Error),
    #[error("{path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
}
