//! Reproducible experiments: configs, runs, sweeps, and their file formats.

mod config;
mod output;
mod runner;
mod schedule;
mod trace;

pub use config::{
    paper_default_config, two_action_config, DiagLevel, EnvConfig, ExperimentConfig, KindName,
    Sigma,
};
pub use output::{
    emit_plot_data, read_trace_csv, summary_json, write_diagnostics_csv, write_trace_csv, PlotFile,
    TraceCsvRow, TRACE_HEADER_PREFIX,
};
pub use runner::{
    final_decade_slope, mean_log_subopt, run_single, run_single_observed, run_sweep, RunFailure,
    StepView, SweepOutcome,
};
pub use schedule::checkpoint_schedule;
pub use trace::{
    log_suboptimality, CheckpointRow, RunKey, RunTrace, TerminalSummary, LOG_SUBOPT_FLOOR,
};
