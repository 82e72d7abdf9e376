//! Experiment runner: configuration, training runs, fixed-ansatz baselines,
//! reports, summaries and report verification.

mod config;
mod report;
mod train;

pub use config::{default_seed_count, Baseline, CorpusConfig, ExperimentConfig, Overrides, Problem};
pub use report::{
    curve_csv, parse_curve_csv, quantile, run_baseline, run_training, summarize, verify_report, write_report, ComparisonRow, Method, RunReport, Spread, StepRow,
    Summary, Verification, SCHEMA_VERSION,
};
pub use train::{build_instances, score_circuit, train_seed, CircuitRecord, InstanceScore, LogRow, SeedRun, ThresholdHit};
