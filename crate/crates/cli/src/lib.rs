//! Command-line driver: parses a [`RunConfig`], runs it on a worker pool of
//! the requested size and writes `<out>.*` data files plus
//! `<out>.manifest.json`.

mod commands;
mod config;
mod emit;
mod error;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

pub use commands::{VerifyRecord, VERIFY_TOL};
pub use config::{parse_config, parse_invocation, render, Command, Invocation, RunConfig, DEFAULT_SEED};
pub use error::CliError;

/// Parses `argv` (program name first) and runs it. Returns the written files,
/// manifest last.
pub fn run<I, T>(argv: I) -> Result<Vec<PathBuf>, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let inv = parse_invocation(argv)?;
    execute(&inv.config, inv.jobs)
}

/// Runs `config` on a dedicated pool of `jobs` threads (default: available
/// parallelism). Results do not depend on `jobs`.
pub fn execute(config: &RunConfig, jobs: Option<usize>) -> Result<Vec<PathBuf>, CliError> {
    let threads = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::usage("jobs", e.to_string()))?;
    let start = Instant::now();
    let mut emit = emit::Emitter::new(&config.out)?;
    let outcome = pool.install(|| commands::execute(config, &mut emit));
    // a failed verification still leaves its report and manifest behind
    if let Err(err) = outcome {
        if matches!(err, CliError::Verification(_)) {
            emit.finish(config, start.elapsed().as_secs_f64(), threads)?;
        }
        return Err(err);
    }
    emit.finish(config, start.elapsed().as_secs_f64(), threads)
}
