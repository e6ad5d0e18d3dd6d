mod args;
mod commands;
mod output;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;

/// Exit statuses. Argument errors reported by clap itself also exit with 2.
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

/// Bad configuration or flag combination.
#[derive(Debug)]
pub struct ConfigError(pub String);

/// Input that parsed but is not acceptable.
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}
impl std::error::Error for Invalid {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return EXIT_CONFIG;
        }
        if cause.is::<Invalid>() {
            return EXIT_VALIDATION;
        }
        if let Some(e) = cause.downcast_ref::<hoi_points::Error>() {
            return match e {
                hoi_points::Error::Config(_) | hoi_points::Error::MissingKnownObject(_) => EXIT_CONFIG,
                hoi_points::Error::Io { .. } => EXIT_IO,
                _ => EXIT_VALIDATION,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<tempfile::PathPersistError>() {
            return EXIT_IO;
        }
    }
    EXIT_VALIDATION
}

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
