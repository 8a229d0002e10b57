//! `epee` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 verification
//! failure, 4 training divergence.

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::{Io, UsageError, VerificationFailed};
use manifest::{digest, Manifest};

const USAGE: u8 = 1;
const DATA: u8 = 2;
const VERIFICATION: u8 = 3;
const DIVERGENCE: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return USAGE;
    }
    if err.downcast_ref::<VerificationFailed>().is_some() {
        return VERIFICATION;
    }
    match err.downcast_ref::<epee::Error>() {
        Some(epee::Error::Divergence { .. }) => DIVERGENCE,
        Some(epee::Error::Config(_)) => USAGE,
        _ => DATA,
    }
}

fn run(cli: &Cli, io: &mut Io) -> anyhow::Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Train(a) => commands::train_cmd(g, a, io),
        Command::Trace(a) => commands::trace_cmd(g, a, io),
        Command::Eval(a) => commands::eval_cmd(g, a, io),
        Command::Grid(a) => commands::grid_cmd(g, a, io),
        Command::Curve(a) => commands::curve_cmd(g, a, io),
        Command::Verify(a) => commands::verify_cmd(g, a, io),
    }
}

fn write_manifest(cli: &Cli, io: Io, code: u8) -> anyhow::Result<()> {
    let mut m = Manifest::new(cli.command.name(), cli);
    m.exit_code = code;
    let mut inputs = io.inputs;
    inputs.extend(cli.global.config.clone());
    for path in inputs {
        if path.is_file() {
            m.inputs.push(digest(&path)?);
        }
    }
    m.outputs = io.outputs;
    m.write(cli.global.dir())?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();

    let argv = match args::merge_config_file(std::env::args_os().collect()) {
        Ok(argv) => argv,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(USAGE);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };

    let mut io = Io::default();
    let code = match run(&cli, &mut io) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    };
    if let Err(e) = write_manifest(&cli, io, code) {
        eprintln!("error: manifest: {e:#}");
        if code == 0 {
            return ExitCode::from(DATA);
        }
    }
    ExitCode::from(code)
}
