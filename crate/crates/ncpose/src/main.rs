use std::process::ExitCode;

use clap::Parser;
use ncpose::cli::{self, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Usage errors are malformed input; --help and --version are not.
            return ExitCode::from(if e.use_stderr() { cli::EXIT_BAD_INPUT as u8 } else { 0 });
        }
    };
    match cli::run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
