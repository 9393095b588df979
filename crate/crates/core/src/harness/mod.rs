//! Training runs, grid search, staged pipelines and their CSV reports.

pub mod config;
pub mod flops;
pub mod grid;
pub mod pipeline;
pub mod report;
pub mod train;

pub use config::{Activation, ExperimentConfig, PruneConfig};
pub use flops::{conv_mult_count, conv_out_dim, flop_count};
pub use grid::{grid_search, grid_search_with, write_results_csv, Grid};
pub use pipeline::{pipeline, prune_stage, PipelineOutput, Splits};
pub use report::{emit_curves, emit_metrics, overfit_report, parse_curves, OverfitReport};
pub use train::{evaluate, init_network, train, EpochMetrics, RunResult, RunStatus, Trained};
