use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;

use hyperfront_cli::{execute, Cli, CliError};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            let err = CliError::Usage(first.to_string());
            eprintln!("{}", err.to_line());
            std::process::exit(err.exit_code());
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    if let Err(e) = execute(cli, &mut lock) {
        let _ = lock.flush();
        eprintln!("{}", e.to_line());
        std::process::exit(e.exit_code());
    }
}
