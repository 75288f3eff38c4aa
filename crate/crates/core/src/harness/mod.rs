//! Monte-Carlo experiment runner: configuration, codebook preparation,
//! seeded trials, CSV output and SVG plots.

mod config;
mod experiment;
mod output;
mod plot;
mod training;

pub use config::{ExperimentConfig, Method, Point};
pub use experiment::{
    run_experiment, run_trial, AggregateRow, ExperimentResult, Instance, PreparedExperiment, PreparedPoint,
    TrialRecord,
};
pub use output::{read_aggregate_csv, write_aggregate_csv, write_trial_csv, AGGREGATE_HEADER, TRIAL_HEADER};
pub use plot::{emit_plot, render_svg, XAxis};
pub use training::{gaussian_samples, measurement_samples, train_measurement_codebook, CodebookTraining};

/// Formats a float with 17 significant digits, enough to round-trip any f64.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// 10·log₁₀(v).
pub fn to_db(v: f64) -> f64 {
    10.0 * v.log10()
}
