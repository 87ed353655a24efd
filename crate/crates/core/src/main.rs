use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = aoi_maintain::cli::Cli::parse();
    match aoi_maintain::cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
