use std::process::ExitCode;

use clap::Parser;
use polscan::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("polscan: {e}");
            ExitCode::from(e.kind().exit_code() as u8)
        }
    }
}
