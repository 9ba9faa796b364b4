//! Command-line harness: synthetic data, bias injection, detectors, group
//! audits, regressions, null simulations and the appendix replay.

pub mod appendix;
pub mod cli;
pub mod config;
pub mod fixtures;
pub mod grid;
pub mod output;
pub mod plot;

use std::fmt;

/// A problem with how the tool was invoked; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Exit code for an error returned by a command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        EXIT_USAGE
    } else {
        EXIT_FAILURE
    }
}

pub use cli::{main_with_args, Cli};
