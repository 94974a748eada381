//! `cyclefix`: run, sweep and check under-relaxed cyclic projection schemes.
//!
//! Exit codes: 0 success, 1 a verification failed, 2 usage error,
//! 3 numerical failure (the report is still written).

mod commands;
mod config;
mod report;
mod scenario;

use std::process::ExitCode;

use config::{parse_config, ConfigError};
use report::{emit, Status};

const THREADS_ENV: &str = "CYCLEFIX_THREADS";

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("cannot start {n} worker threads: {e}"))
}

fn main() -> ExitCode {
    let config = match parse_config(std::env::args().skip(1)) {
        Ok(c) => c,
        Err(ConfigError::Clap(e)) => e.exit(),
        Err(ConfigError::Invalid(msg)) => return usage_error(msg),
    };
    if let Err(msg) = init_threads() {
        return usage_error(msg);
    }
    let report = match commands::execute(&config) {
        Ok(r) => r,
        Err(e) => return usage_error(e),
    };
    let bytes = match report.render(config.format) {
        Ok(b) => b,
        Err(e) => return usage_error(e),
    };
    if let Err(e) = emit(config.out.as_deref(), &bytes) {
        return usage_error(e);
    }
    if let Some(e) = &report.error {
        eprintln!("error: {e}");
        return ExitCode::from(3);
    }
    for f in &report.failures {
        eprintln!("failed: {f}");
    }
    match report.status {
        Status::Ok => ExitCode::SUCCESS,
        Status::Failed => ExitCode::from(1),
    }
}
