use std::fs;
use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use sdsomp_core::metrics::detection;
use sdsomp_core::oracle::{
    covers_all_endmembers_within, diagnostics, planted_combination_residuals, solve_sdmmv_bruteforce,
};
use sdsomp_core::FclsOptions;

use crate::dataset::{read_dataset, write_json, Input};
use crate::failure::{usage, Failure};

#[derive(Debug, Args)]
pub struct OracleCmd {
    #[arg(long)]
    pub data: Option<PathBuf>,

    #[arg(long)]
    pub pixels: Option<PathBuf>,

    /// Feasibility radius; defaults to `--delta-mult` times the noise bound.
    #[arg(long)]
    pub delta: Option<f64>,

    /// Noise bound; defaults to the dataset's true bound.
    #[arg(long)]
    pub epsilon: Option<f64>,

    #[arg(long, default_value_t = 2.0)]
    pub delta_mult: f64,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagCmd {
    /// Dataset directory written by `synth`.
    #[arg(long)]
    pub data: PathBuf,

    /// Delta for the window and radius quantities; defaults to twice the
    /// true noise bound.
    #[arg(long)]
    pub delta: Option<f64>,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn emit(value: &serde_json::Value, out: Option<&PathBuf>, name: &str) -> Result<(), Failure> {
    println!("{}", serde_json::to_string_pretty(value)?);
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_json(&dir.join(name), value)?;
    }
    Ok(())
}

pub fn run_oracle(cmd: &OracleCmd) -> Result<(), Failure> {
    let input = Input::open(cmd.data.as_deref(), cmd.pixels.as_deref())?;
    let delta = match (cmd.delta, cmd.epsilon, input.instance()) {
        (Some(d), _, _) => d,
        (None, Some(e), _) => cmd.delta_mult * e,
        (None, None, Some(inst)) => cmd.delta_mult * inst.noise_bound_true,
        (None, None, None) => return Err(usage("bare pixels need --delta or --epsilon")),
    };
    let support = solve_sdmmv_bruteforce(input.pixels(), delta, FclsOptions::default())?;
    let truth = input.instance().map(|inst| {
        let diag = diagnostics(inst, Some(delta)).ok();
        json!({
            "complete_pure_pixel_set": detection(&support, &inst.reference_set(), inst),
            "covers_within_coverage_radius": diag
                .as_ref()
                .and_then(|d| d.coverage_radius)
                .map(|r| covers_all_endmembers_within(support.as_slice(), &inst.abundances, r)),
        })
    });
    emit(
        &json!({
            "input": input.describe(),
            "delta": delta,
            "support": support,
            "size": support.len(),
            "ground_truth": truth,
        }),
        cmd.out.as_ref(),
        "oracle.json",
    )
}

pub fn run_diag(cmd: &DiagCmd) -> Result<(), Failure> {
    let (manifest, inst) = read_dataset(&cmd.data)?;
    let delta = cmd.delta.unwrap_or(2.0 * inst.noise_bound_true);
    let diag = diagnostics(&inst, Some(delta))?;
    let planted_max = planted_combination_residuals(&inst)
        .ok()
        .map(|r| r.into_iter().fold(0.0, f64::max));
    emit(
        &json!({
            "manifest": manifest,
            "diagnostics": diag,
            "satisfies_thm2_bound": diag.satisfies_thm2(),
            "satisfies_thm3_bound": diag.satisfies_thm3(),
            "delta_in_thm2_window": diag.delta_window_thm2.contains(delta),
            "delta_in_thm3_window": diag.delta_window_thm3.contains(delta),
            "planted_combination_max_residual": planted_max,
        }),
        cmd.out.as_ref(),
        "diag.json",
    )
}
