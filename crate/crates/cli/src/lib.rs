//! Command-line front end for the `hemiwidth` library: width spectra, the
//! length-spectrum count, calibrated hemi-ellipsoids, closed billiard
//! trajectories and Crofton mass estimates, with machine-readable reports.

pub mod app;
pub mod commands;
pub mod config;
pub mod plot;
pub mod report;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("computation failed: {0}")]
    Compute(String),
    #[error("i/o: {0}")]
    Io(String),
}

/// Exit status when every check passed.
pub const EXIT_OK: i32 = 0;
/// Exit status when the run completed but some check failed.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Exit status for bad arguments or input.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for numerical or i/o failures.
pub const EXIT_RUNTIME: i32 = 3;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input(_) => EXIT_USAGE,
            CliError::Compute(_) | CliError::Io(_) => EXIT_RUNTIME,
        }
    }
}
