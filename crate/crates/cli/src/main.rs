//! `occsafe`: build risk tables, run single trials and batch studies.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 when an
//! embedded acceptance check of a study fails.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

/// What a successful run concluded.
pub enum Outcome {
    Done,
    ChecksFailed,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();

    let argv: Vec<String> = std::env::args().collect();
    let result = match &cli.command {
        Command::BuildTable(a) => commands::build_table(&cli, a, &argv),
        Command::Simulate(a) => commands::simulate(&cli, a, &argv),
        Command::Evaluate(a) => commands::evaluate(&cli, a, &argv),
        Command::Sweep(a) => commands::sweep(&cli, a, &argv),
        Command::Ablate(a) => commands::ablate(&cli, a, &argv),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => {
            eprintln!("one or more embedded checks failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
