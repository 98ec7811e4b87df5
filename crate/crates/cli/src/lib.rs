//! Configuration, orchestration and reporting for the `substatic` binary.

pub mod app;
pub mod config;
pub mod emit;
pub mod experiments;
pub mod report;

pub use config::{ExperimentConfig, ExperimentKind, OutputFormat};
pub use experiments::run;
pub use report::{RunReport, Status, Table, Verdict};
