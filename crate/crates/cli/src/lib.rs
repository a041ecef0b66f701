//! The `midist` command: reads a table, builds the report, writes it out.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numeric precondition failure
//! (zero cells where positivity is required, non-convergent fits), 64 usage.

mod args;
mod output;
mod report;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;

pub use args::Args;
pub use report::{build_report, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

/// A failure with its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<midist_core::Error> for Failure {
    fn from(e: midist_core::Error) -> Self {
        Self {
            code: if e.is_numeric() { EXIT_NUMERIC } else { EXIT_INPUT },
            message: e.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Runs the command with `argv` (program name first) and returns the exit status.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    match build_report(&args) {
        Ok(report) => {
            let text = match args.format {
                args::OutputFormat::Json => output::to_json(&report),
                args::OutputFormat::Text => output::to_text(&report),
            };
            for w in &report.warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            if out.write_all(text.as_bytes()).is_err() {
                return EXIT_INPUT;
            }
            EXIT_OK
        }
        Err(f) => {
            let _ = writeln!(err, "error: {f}");
            f.code
        }
    }
}
