//! `sdsomp`: synthetic scene generation, single-run unmixing, Monte-Carlo
//! sweeps, exhaustive oracle runs and theory diagnostics.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod dataset;
mod failure;
mod oracle;
mod svg;
mod sweep;
mod synth;
mod unmix;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use failure::{usage, Failure};

#[derive(Debug, Parser)]
#[command(name = "sdsomp", version, about = "Greedy self-dictionary endmember extraction")]
struct Cli {
    /// Worker threads for Monte-Carlo sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic scene with ground truth.
    Synth(synth::SynthCmd),
    /// Extract endmembers from one scene.
    Unmix(unmix::UnmixCmd),
    /// Seeded Monte-Carlo sweep over one scene or algorithm parameter.
    Sweep(sweep::SweepCmd),
    /// Exhaustive row-sparsity solution of a tiny scene (at most 16 pixels).
    Oracle(oracle::OracleCmd),
    /// Dump the recovery-condition quantities of a scene.
    Diag(oracle::DiagCmd),
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(usage("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    match &cli.command {
        Command::Synth(c) => synth::run(c),
        Command::Unmix(c) => unmix::run(c),
        Command::Sweep(c) => sweep::run(c),
        Command::Oracle(c) => oracle::run_oracle(c),
        Command::Diag(c) => oracle::run_diag(c),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            f.exit_code()
        }
    }
}
