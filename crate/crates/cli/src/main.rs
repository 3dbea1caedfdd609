use std::process::ExitCode;

use clap::Parser;
use hawkes_dt_cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HAWKES_DT_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hawkes-dt: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
