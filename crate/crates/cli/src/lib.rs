//! Command implementations behind the `hypertime` binary.

// `!(a > b)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod config;
pub mod output;

use std::io::Write;

use anyhow::Result;

use crate::args::{Cli, Command};

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Train(a) => commands::train::run(a, stdout),
        Command::Predict(a) => commands::predict::run(a, stdout),
        Command::Evaluate(a) => commands::evaluate::run(a, stdout),
        Command::Spectrum(a) => commands::spectrum::run(a, stdout),
        Command::Generate(a) => commands::generate::run(a),
    }
}
