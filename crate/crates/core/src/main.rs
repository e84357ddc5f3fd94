use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = hivqe::cli::Cli::parse();
    if let Err(e) = hivqe::cli::init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match hivqe::cli::execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
