use std::process::ExitCode;

use cellstore_cli::{run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    // Usage errors count as configuration errors; exit code 2 is reserved.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cellstore: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
