use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = flowcf_cli::Cli::parse();
    match flowcf_cli::commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}
