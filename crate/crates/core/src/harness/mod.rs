//! Scenario files, parameter sweeps, CSV output and comparison reports.

pub mod csv;
pub mod experiment;
pub mod report;
pub mod scenario;

pub use experiment::{run_experiment, run_sweep, RunFailure, Sweep, SweepConfig};
pub use report::{render as render_report, Comparison, Metric};
pub use scenario::Scenario;
