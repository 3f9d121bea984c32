//! Command-line front end for the adoption solvers and verifiers.

mod run;
mod spec;

use std::process::ExitCode;

use clap::Parser;

use crate::run::{classify, run};
use crate::spec::{Cli, RunSpec};

fn main() -> ExitCode {
    let spec = RunSpec::from(Cli::parse());
    let status = match run(&spec) {
        Ok(status) => status,
        Err(err) => {
            eprintln!("error: {err:#}");
            classify(&err)
        }
    };
    ExitCode::from(status.code() as u8)
}
