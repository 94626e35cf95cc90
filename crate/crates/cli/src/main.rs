mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use phasecorr::{Error, Result};

use config::{Cli, RunConfig};

fn resolve(cli: Cli) -> Result<RunConfig> {
    if let Some(path) = &cli.config {
        if cli.command.is_some() {
            return Err(Error::invalid(
                "--config replays a stored run and takes no subcommand",
            ));
        }
        return RunConfig::from_output(path);
    }
    match cli.command {
        Some(command) => Ok(RunConfig {
            seed: cli.seed,
            out: cli.out,
            format: cli.format,
            command,
        }),
        None => Err(Error::invalid("a subcommand or --config is required")),
    }
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::invalid("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::invalid(format!("cannot size the thread pool: {e}")))?;
    }
    let config = resolve(cli)?;
    commands::run(&config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.command.is_none() && cli.config.is_none() {
        let _ = Cli::command().print_help();
        return ExitCode::from(2);
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
