use std::process::ExitCode;

use clap::Parser;
use qkdlink::io::cli::{run, Cli};
use qkdlink::ErrorCategory;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            println!("{}", out.report.display());
            for s in &out.series {
                println!("{}", s.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let (label, code) = match e.category() {
                ErrorCategory::Config => ("config", 2),
                ErrorCategory::Format => ("format", 3),
                ErrorCategory::Domain => ("domain", 4),
                ErrorCategory::Io => ("io", 1),
            };
            eprintln!("error[{label}]: {e}");
            ExitCode::from(code)
        }
    }
}
