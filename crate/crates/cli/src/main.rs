use std::ffi::OsString;
use std::process::ExitCode;

use clap::Parser;
use fseg_cli::{init_logging, run, Cli};

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let cli = Cli::parse_from(&argv);
    init_logging(cli.log_level);
    match run(&cli, &argv[1..]) {
        Ok(status) if status.failed_items() == 0 => ExitCode::SUCCESS,
        Ok(status) => {
            eprintln!("error: {} item(s) failed; see the log above", status.failed_items());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
