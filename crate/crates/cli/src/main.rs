//! `berrylab`: oracles, Berry phase estimation and verifier experiments.
//!
//! Every command writes `<out>.manifest.json` next to its main output.
//! `berrylab rerun --manifest <file>` replays it; outputs other than the
//! manifest's timing fields are reproduced bit for bit.

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Rerun(r) => manifest::rerun(&r),
        cmd => manifest::execute(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
