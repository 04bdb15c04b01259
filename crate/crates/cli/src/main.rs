//! `symoden`: generate datasets, train and evaluate models, run controllers
//! and render reports.

mod cmd;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use symoden_core::Error;

#[derive(Parser, Debug)]
#[command(name = "symoden", version, about = "Learn controlled Hamiltonian dynamics and control with them")]
struct Cli {
    /// Root directory for default output locations.
    #[arg(long, global = true, env = "SYMODEN_OUT", default_value = "symoden-out")]
    out: PathBuf,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate the truth system and write a JSON-lines dataset.
    Generate(cmd::generate::GenerateArgs),
    /// Train one model and write its checkpoint and loss history.
    Train(cmd::train::TrainArgs),
    /// Score checkpoints on a dataset.
    Eval(cmd::eval::EvalArgs),
    /// Run an energy-shaping controller on the truth system.
    Control(cmd::control::ControlArgs),
    /// Render SVG plots and a markdown summary from metric files.
    Report(cmd::report::ReportArgs),
    /// Train and score a grid of dataset sizes, variants and horizons.
    Sweep(cmd::sweep::SweepArgs),
}

/// Exit code and message tag for a library error.
fn classify(e: &Error) -> (u8, &'static str) {
    match e {
        Error::Contract(_) | Error::Unsupported(_) => (2, "usage"),
        Error::Io(_) => (2, "io"),
        Error::Json(_) => (2, "format"),
        Error::NumericFault(_) => (3, "numeric"),
        Error::SingularActuation(_) => (4, "actuation"),
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[usage]: {}", one_line(first));
            return ExitCode::from(2);
        }
    };
    let out = cli.out;
    let res = match cli.cmd {
        Command::Generate(a) => cmd::generate::run(&a, &out),
        Command::Train(a) => cmd::train::run(&a, &out),
        Command::Eval(a) => cmd::eval::run(&a, &out),
        Command::Control(a) => cmd::control::run(&a, &out),
        Command::Report(a) => cmd::report::run(&a, &out),
        Command::Sweep(a) => cmd::sweep::run(&a, &out),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, tag) = classify(&e);
            eprintln!("error[{tag}]: {}", one_line(&e.to_string()));
            ExitCode::from(code)
        }
    }
}
