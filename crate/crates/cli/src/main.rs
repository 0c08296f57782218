use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = kbm_cli::Cli::parse();
    if let Err(e) = kbm_cli::init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    ExitCode::from(kbm_cli::execute(cli))
}
