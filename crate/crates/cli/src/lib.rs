//! Scenario files, the acceptance battery and report output for the `srpath` binary.

pub mod config;
pub mod report;
pub mod run;
pub mod suite;
