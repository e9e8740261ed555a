//! `spintri`: classify, solve and cross-check classical Heisenberg spin triangles.

// Negated float comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod instance;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::*;
use crate::error::CliResult;

#[derive(Parser, Debug)]
#[command(name = "spintri", version, about, args_override_self = true)]
struct Cli {
    /// Flat `key = value` TOML file of flag defaults; flags on the command line win
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Case label, conserved values and energy range of an instance (JSON)
    Classify(ClassifyArgs),
    /// Sample the closed-form trajectory
    Simulate(SimulateArgs),
    /// Sample the Runge–Kutta reference trajectory
    Integrate(IntegrateArgs),
    /// Largest deviation between closed form and reference; exit 4 above --tol
    Compare(CompareArgs),
    /// Actions, frequencies and Floquet quasienergy of a generic instance (JSON)
    Actions(ActionsArgs),
    /// Period, α(T) and I1 over a grid of energies on one σ slice
    Sweep(SweepArgs),
    /// Closed forms of the non-generic cases and the stationary states
    Special(SpecialArgs),
    /// Complete elliptic integral, Jacobi and Weierstrass functions (JSON)
    Elliptic(EllipticArgs),
    /// Closed forms against the reference on seeded random instances; exit 4 on failure
    Selftest(SelftestArgs),
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Classify(a) => classify(a),
        Command::Simulate(a) => simulate(a),
        Command::Integrate(a) => integrate(a),
        Command::Compare(a) => compare(a),
        Command::Actions(a) => actions(a),
        Command::Sweep(a) => sweep(a),
        Command::Special(a) => special(a),
        Command::Elliptic(a) => elliptic(a),
        Command::Selftest(a) => selftest(a),
    }
}

fn run(args: Vec<OsString>) -> i32 {
    let result = config::expand(args).and_then(|args| match Cli::try_parse_from(args) {
        Ok(cli) => dispatch(&cli),
        Err(e) => {
            // Help and version go to stdout with status 0, real usage errors to stderr with 2.
            let _ = e.print();
            std::process::exit(e.exit_code());
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("spintri: {e}");
            e.exit_code()
        }
    }
}

fn main() {
    std::process::exit(run(std::env::args_os().collect()));
}
