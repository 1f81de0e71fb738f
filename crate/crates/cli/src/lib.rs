//! Command-line front end: `simulate`, `fit`, `compare`, `benchmark`,
//! `harmonics` and `oracle-check`.

pub mod args;
pub mod commands;
pub mod oracle;
pub mod report;

use std::fmt;

pub use args::Cli;
use args::Command;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Io(String),
}

impl CliError {
    pub fn io(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<bornlab_core::Error> for CliError {
    fn from(e: bornlab_core::Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Io(e.to_string())
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Simulate(a) => commands::simulate(cli, a).map(|_| EXIT_OK),
        Command::Fit(a) => commands::fit(cli, a).map(|_| EXIT_OK),
        Command::Compare(a) => commands::compare(cli, a).map(|_| EXIT_OK),
        Command::Benchmark(a) => commands::benchmark(cli, a).map(|_| EXIT_OK),
        Command::Harmonics(a) => commands::harmonics(cli, a).map(|_| EXIT_OK),
        Command::OracleCheck(a) => {
            commands::oracle_check(cli, a)
                .map(|pass| if pass { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> Result<i32, CliError> {
    match cli.threads {
        Some(0) => Err(CliError::Input("--threads must be >= 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Io(e.to_string()))?
            .install(|| dispatch(cli)),
        None => dispatch(cli),
    }
}
