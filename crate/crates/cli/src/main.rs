use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    graphtron_cli::run(graphtron_cli::Cli::parse())
}
