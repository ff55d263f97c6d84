//! Command-line front end for `hpds-core`: system files in, JSON reports
//! and CSV trajectories out.
//!
//! Every command reads a [`spec::SystemSpecFile`]. `analyze`, `decompose`
//! and `transform` print JSON, `solve` and `simulate` print CSV with a
//! header row. Exit codes: 0 success, 2 bad input, 3 analysis refused,
//! 4 numerical failure.

pub mod commands;
pub mod error;
pub mod format;
pub mod parallel;
pub mod report;
pub mod spec;

pub use error::CliError;
