//! Experiment orchestration: models from config, seeded trials run in
//! parallel, regret aggregation with bound overlays, and CSV output.
//!
//! Every trial draws from generators seeded by
//! [`trial_seed`](crate::rng::trial_seed), and results are reduced in trial
//! order, so output does not depend on the thread count.

mod config;
mod diagnostics;
mod experiment;
mod output;
mod trial;

pub use config::{ExperimentConfig, ExperimentSettings, ModelConfig, StrategiesConfig};
pub use diagnostics::{
    best_pair_spec, martingale_diagnostic, run_martingale_diagnostic, MartingaleReport,
};
pub use experiment::{
    bound_overlays, run_experiment, run_experiment_on, worst_case_model, CheckpointStats,
    ExperimentResult, RegretCurve,
};
pub use output::{emit_csv, emit_plot_data, format_float, write_csv, write_plot_data, CSV_HEADER};
pub use trial::{
    run_trial, run_trial_with, MartingaleSpec, MartingaleTrace, TrialOutput, TrialPlan,
};
