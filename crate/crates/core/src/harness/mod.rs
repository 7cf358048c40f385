//! Scenario runner: configuration, the round engine, legality metrics and
//! CSV output.

pub mod config;
pub mod emit;
pub mod metrics;
pub mod trial;

pub use config::Config;
pub use emit::{csv_rows, csv_string, summary, trace_path, write_csv, write_trace, CsvRow};
pub use metrics::{agreement_round, measure, measure_stabilization, Metrics, Violations};
pub use trial::{run_ensemble, run_trial, Retirement, RoundRecord, Trace, TrialOutput};
