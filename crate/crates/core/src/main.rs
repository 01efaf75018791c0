use std::process::ExitCode;

use clap::Parser;
use quote_attribution::cli::{Cli, init_logging, run};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = cli
        .common
        .resolve()
        .map_or_else(|_| "warn".to_string(), |c| c.log_level);
    init_logging(&level);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
