//! Seeded multi-trial experiments, figure presets, CSV output and the
//! invariant suite.

mod config;
mod csv;
mod metrics;
mod presets;
mod run;
pub mod validate;

pub use config::{ExperimentConfig, LrSchedule, Replication};
pub use csv::{emit_csv, read_csv, summary_path, CSV_HEADER};
pub use metrics::{IterationRecord, RunMetrics, SummaryRow, TrialMetrics, TrialTheory};
pub use presets::{preset_runs, run_figure_preset, Preset, PresetOptions, PresetRun};
pub use run::{run_experiment, run_trial, trial_theory, TrialSetup, BETA_SAFETY, INVARIANT_TOL};
