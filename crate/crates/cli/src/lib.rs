//! The `puk` command line.
//!
//! Exit codes: 0 success, 1 usage, 2 data or validation, 3 internal.

pub mod args;
pub mod commands;
pub mod error;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

pub use args::{Cli, Command};
pub use error::{CliError, CliResult};

pub fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Score(a) => commands::score(a),
        Command::Scene(a) => commands::scene(a),
        Command::Serve(a) => commands::serve(a),
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
