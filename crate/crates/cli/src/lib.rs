//! Configuration-driven source-localization experiments: config parsing,
//! the realization × architecture runner, and CSV reports.

pub mod config;
pub mod experiment;
pub mod report;

pub use config::{ConfigError, ExperimentConfig, InputNormalization, Sweep, SweepParam};
pub use experiment::{run_experiment, CellResult};
pub use report::{read_raw, report, report_from_raw, summarize, RawRow, ReportError, SummaryRow};
