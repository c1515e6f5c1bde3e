use std::process::ExitCode;

use clap::Parser;
use eto_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match eto_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("eto: {e}");
            e.exit_code()
        }
    }
}
