//! `proxtree` command-line front end.

mod args;
mod commands;
mod failure;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use failure::Failure;

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::internal(e.to_string()))?;
    }
    match &cli.command {
        Command::Featurize(a) => commands::featurize_cmd(a),
        Command::Split(a) => commands::split_cmd(a),
        Command::Fit(a) => commands::fit_cmd(a),
        Command::Importance(a) => commands::importance_cmd(a),
        Command::Simulate(a) => commands::simulate_cmd(a),
        Command::Effects(a) => commands::effects_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(u8::try_from(f.code).unwrap_or(1))
        }
    }
}
