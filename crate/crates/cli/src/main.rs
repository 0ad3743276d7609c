mod args;
mod commands;
mod report;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Format};

const USAGE_ERROR: u8 = 2;
const DOMAIN_ERROR: u8 = 1;

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("SINGTRACE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("SINGTRACE_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(USAGE_ERROR);
    }
    let report = match commands::run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(DOMAIN_ERROR);
        }
    };
    let text = match cli.format {
        Format::Json => report.json(),
        Format::Csv => match report.csv() {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(DOMAIN_ERROR);
            }
        },
    };
    if let Err(e) = report::emit(&text, cli.out.as_deref()) {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(DOMAIN_ERROR);
    }
    ExitCode::SUCCESS
}
