mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use ppg_anomaly::{Error, ErrorCategory};

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        ErrorCategory::Configuration => 2,
        ErrorCategory::Ingestion => 3,
        ErrorCategory::Computation => 4,
    }
}

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if cli.jobs == 0 {
        eprintln!("error: configuration error: --jobs must be at least 1");
        return ExitCode::from(2);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
        eprintln!("error: cannot start worker pool: {e}");
        return ExitCode::from(4);
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
