use std::process::ExitCode;

use clap::Parser;
use spikedet::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stage = cli.command.stage();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: [{stage}] {e:#}");
            ExitCode::FAILURE
        }
    }
}
