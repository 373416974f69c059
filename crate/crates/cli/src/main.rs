mod cli;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use crate::cli::{Cli, Command};
use crate::config::CliError;

fn main() -> ExitCode {
    let args = match Cli::try_parse() {
        Ok(args) => args,
        // clap exits with 2 on usage errors and 0 for --help/--version.
        Err(err) => err.exit(),
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.code)
        }
    }
}

fn run(args: Cli) -> Result<(), CliError> {
    let file = config::load_file_config(args.config.as_deref())?;
    if let Some(threads) = args.threads.or(file.threads) {
        if threads == 0 {
            return Err(CliError::usage("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
    }
    match &args.command {
        Command::Generate(cmd) => commands::cmd_generate(cmd, &file, args.format),
        Command::Train(cmd) => commands::cmd_train(cmd, &file, args.format),
        Command::Predict(cmd) => commands::cmd_predict(cmd, &file, args.format),
        Command::Evaluate(cmd) => commands::cmd_evaluate(cmd, &file, args.format),
        Command::Bench(cmd) => commands::cmd_bench(cmd, &file, args.format),
    }
}
