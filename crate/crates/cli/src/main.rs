mod args;
mod commands;
mod source;

use std::process::ExitCode;

use clap::Parser;
use uspann::Error;

use args::{Cli, Command};

fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var("USPANN_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::Usage(format!("USPANN_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Usage(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), Error> {
    configure_threads()?;
    match &cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::BuildKnn(a) => commands::build_knn(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::BuildIndex(a) => commands::build_index_cmd(a),
        Command::Eval(a) => commands::eval(a),
        Command::Compare(a) => commands::compare_cmd(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
