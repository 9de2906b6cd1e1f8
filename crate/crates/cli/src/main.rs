use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    ExitCode::from(seirs_cli::main_with(seirs_cli::Cli::parse()))
}
