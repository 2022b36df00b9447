use std::io::{stdin, stdout, IsTerminal};
use std::process::ExitCode;

use clap::Parser;

use trainbot_service::cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli, stdin().lock(), stdout().lock(), stdin().is_terminal()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("trainbot: {e}");
            ExitCode::FAILURE
        }
    }
}
