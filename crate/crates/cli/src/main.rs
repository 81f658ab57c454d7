use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = ac_action_cli::Cli::parse();
    match ac_action_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
