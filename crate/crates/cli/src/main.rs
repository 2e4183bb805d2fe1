use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    fkvx::main_with(fkvx::Cli::parse())
}
