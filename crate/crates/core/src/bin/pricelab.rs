use std::process::ExitCode;

use clap::Parser;
use pricelab::cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pricelab: {e}");
            ExitCode::FAILURE
        }
    }
}
