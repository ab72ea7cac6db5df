//! Experiment orchestration: sweeps, fits and reports.

pub mod commands;
pub mod config;
pub mod fit;
pub mod report;
pub mod sweep;

pub use config::{BoundarySelector, ExperimentConfig};
pub use fit::{fit_exponent, PowerFit};
pub use report::{emit_report, ReportFiles};
pub use sweep::{run_lower_pipeline, run_upper_sweep, PartialSweep, SweepResult, Verdict};
