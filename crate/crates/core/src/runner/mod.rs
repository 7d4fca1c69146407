//! Configuration, the training loop, evaluation, sweeps, the variance
//! protocol, and report rendering.

mod config;
mod eval;
mod report;
mod sweep;
mod train;
mod variance;

pub use config::{DataSource, TrainConfig};
pub use eval::{evaluate, predict_dump, report_from_dump};
pub use report::{
    ExperimentReport, Format, ReportRow, SweepRow, SweepTable, VarianceColumn, VarianceReport,
};
pub use sweep::{
    alpha_sweep, expert_count_sweep, lambda_sweep, run_once, ALPHA_SWEEP, SINGLE_SWEEP, TRIPLE_SWEEP,
};
pub use train::{prepare_data, train, EpochLog, ExpertEpochLog, PreparedData, TrainOutcome};
pub use variance::{variance_column, variance_protocol};
