mod args;
mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::Parser;
use hybridscreen::Error;

use args::{Cli, Command};

/// 0 success, 2 invalid input, 3 I/O failure, 4 numerical failure.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 3,
        Error::Divergence { .. } => 4,
        _ => 2,
    }
}

fn run(cli: &Cli) -> hybridscreen::Result<()> {
    match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Fuse(a) => commands::fuse(a),
        Command::Report(a) => commands::report(a),
    }
}

fn main() -> ExitCode {
    let argv = match config::expand_args(std::env::args_os().collect()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
