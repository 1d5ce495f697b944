//! Command-line front end: synthesize or load batches, train, calibrate,
//! evaluate and emit PCA plot data.
//!
//! Each command is a pure function of its resolved configuration and input
//! files; outputs are written atomically and contain no timestamps, so a
//! rerun reproduces them byte for byte.

mod args;
mod commands;
mod config;

use std::ffi::OsString;

use clap::Parser;

pub use args::{Cli, Command};
pub use commands::{execute, GROUND_TRUTH_SCHEMA, PCA_SCHEMA, REPORT_SCHEMA, SUMMARY_SCHEMA};
pub use config::{resolve, KernelChoice, RunConfig, CONFIG_SCHEMA};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or spec; exit code 2.
    Usage(String),
    /// Unreadable or inconsistent data, numeric failure; exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<batchcal::Error> for CliError {
    fn from(e: batchcal::Error) -> Self {
        match e {
            batchcal::Error::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match resolve(&cli).and_then(|cfg| execute(&cfg)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
