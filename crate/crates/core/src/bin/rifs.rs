use std::process::ExitCode;

use clap::Parser;
use rifs_codec::cli::{run, CliConfig};

fn main() -> ExitCode {
    let cli = CliConfig::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rifs: {e}");
            ExitCode::FAILURE
        }
    }
}
