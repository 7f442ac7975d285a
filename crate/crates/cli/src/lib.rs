//! The `cote` command line: ingest, validate, stats, build, refine, sample,
//! eval and report.
//!
//! Exit codes: 0 success, 1 validation or format error, 2 usage error,
//! 3 when some refinements failed (the output is still written).

mod args;
mod commands;

use std::ffi::OsString;

use clap::Parser;

pub use args::Cli;

/// Some examples could not be refined.
#[derive(Debug, thiserror::Error)]
#[error("{failed} of {total} examples could not be refined")]
pub struct PartialRefine {
    pub failed: usize,
    pub total: usize,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

/// Runs one invocation; `argv[0]` is the program name.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .target(env_logger::Target::Stderr)
        .try_init();

    match commands::dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<PartialRefine>().is_some() {
                EXIT_PARTIAL
            } else {
                EXIT_INVALID
            }
        }
    }
}
