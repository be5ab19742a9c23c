//! `mgsp` command-line front end.

pub mod args;
mod commands;
pub mod manifest;

use std::ffi::OsString;
use std::fmt;

use clap::Parser;
use mgsp_core::MgspError;

use crate::args::Cli;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 2;
pub const EXIT_PARAM: i32 = 3;
pub const EXIT_GRAPH: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn param(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_PARAM,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<MgspError> for CliError {
    fn from(e: MgspError) -> Self {
        let code = match e {
            MgspError::Io(_) | MgspError::Image(_) | MgspError::Parse(_) => EXIT_IO,
            MgspError::Shape { .. } | MgspError::InvalidParameter(_) => EXIT_PARAM,
            MgspError::InvalidGraph(_) => EXIT_GRAPH,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_IO } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("mgsp: {e}");
            e.code
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::param("--jobs must be at least 1"));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().map_err(|e| CliError::param(e.to_string()))?;
    pool.install(|| commands::dispatch(cli))
}
