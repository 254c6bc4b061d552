mod commands;
mod model;
mod report;

use clap::Parser;

use crate::commands::{Cli, CliError};

fn main() {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}

impl CliError {
    /// Exit codes: 2 schema violations, 3 domain errors, 4 I/O failures.
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}
