//! `mnl`: command-line driver for the number-embedding magnitude analyses.
//!
//! Exit status: 0 success, 1 invalid input or arguments, 2 I/O failure, 3 numeric
//! degeneracy. Failures print one line starting with `error:` on stderr.

mod analyze;
mod args;
mod config;
mod failure;
mod regress;
mod synth;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use failure::{Failure, EXIT_VALIDATION};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.kind().to_string();
            let detail = e.render().to_string();
            let first = detail
                .lines()
                .find(|l| l.starts_with("error:"))
                .map(|l| l.trim_start_matches("error:").trim().to_string())
                .unwrap_or(text);
            eprintln!("{}", Failure::validation(first));
            return ExitCode::from(EXIT_VALIDATION as u8);
        }
    };
    let result = match cli.command {
        Command::Analyze(a) => analyze::run_analyze(a),
        Command::Synth(a) => synth::run_synth(a),
        Command::Regress(a) => regress::run_regress(a),
        Command::ReportMerge(a) => analyze::run_merge(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.code as u8)
        }
    }
}
