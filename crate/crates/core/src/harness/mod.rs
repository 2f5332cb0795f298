//! Configuration, corpus generation, inequality suites and reports.

pub mod config;
pub mod corpus;
pub mod report;
pub mod suites;

pub use config::ExperimentConfig;
pub use report::{emit_report, ReportFormat, SuiteReport, Verdict};
pub use suites::{Harness, Suite};
