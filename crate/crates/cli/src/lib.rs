//! Command-line front end for `freelens`.
//!
//! [`parse_args`] turns an argument vector into a validated [`RunConfig`];
//! [`run`] executes it and maps the outcome to an exit status: 0 on success,
//! 1 when a computation fails, 2 on a usage error. Text reports print every
//! number with 15 significant digits; CSV output uses the shortest decimal
//! that round-trips.

mod config;
mod run;

pub use config::*;
pub use run::{execute, run};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Help or version text requested; not an error for the exit status.
    #[error("{0}")]
    Help(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Compute(#[from] freelens::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Help(_) => 0,
            CliError::Usage(_) => 2,
            CliError::Compute(_) | CliError::Io(_) => 1,
        }
    }
}

/// Worker cap from `FREELENS_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var("FREELENS_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("FREELENS_THREADS must be a positive integer, got {s:?}"))),
        },
    }
}
