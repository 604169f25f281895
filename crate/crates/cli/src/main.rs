use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = bridge_cli::app::Cli::parse();
    match bridge_cli::app::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("chatbridge: {e:#}");
            ExitCode::FAILURE
        }
    }
}
