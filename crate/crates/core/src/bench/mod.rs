//! Experiment harness: configuration, convergence studies, slope fits and
//! charts.

pub mod config;
pub mod plot;
pub mod slope;
pub mod study;

pub use config::{ExperimentConfig, PartialConfig, GUARDRAIL_STEPS};
pub use plot::{emit_plot, PlotKind};
pub use slope::{fit_slope, SlopeFit};
pub use study::{read_csv, run_and_write, run_study, write_csv, ConvergenceRow, CSV_COLUMNS};
