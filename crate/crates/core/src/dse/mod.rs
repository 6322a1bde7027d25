//! End-to-end exploration: extraction, merging, cost estimation and
//! partitioning for the four pipeline configurations, plus sweeps and
//! report files.

mod pipeline;
mod report;
mod sweep;

pub use pipeline::{
    evaluate_point, prepare, profile, redirect_calls, run_pipeline, Configuration, Funnel, MergeRecord, PipelineConfig,
    PointResult, Prepared, Profile,
};
pub use report::{
    read_sweep_csv, validate_report, write_sweep_csv, ConfigReport, DseReport, SweepRow, CSV_HEADER, REPORT_SCHEMA,
};
pub use sweep::{preset_budgets, sweep, SweepGrid, PRESET_BANDWIDTHS, PRESET_LATENCIES};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DseError {
    #[error("input {index}: {message}")]
    Input { index: usize, message: String },
    #[error("profiling input {index}: {error}")]
    Execution { index: usize, error: crate::ir::ExecError },
    #[error("module: {0}")]
    Module(String),
    #[error(transparent)]
    Cost(#[from] crate::cost::CostError),
    #[error(transparent)]
    Partition(#[from] crate::partition::PartitionError),
    #[error("no inputs to profile with")]
    NoInputs,
}
