use std::fs;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use serde_json::json;
use sdsomp_core::experiment::reference_for;
use sdsomp_core::metrics::{detection, mrsa};
use sdsomp_core::model::{save_matrix, MatrixFormat};
use sdsomp_core::oracle::{diagnostics, recovery_error};
use sdsomp_core::{unmix, MixingInstance, SompResult, UnmixReport};

use crate::args::{TableFormat, UnmixArgs};
use crate::dataset::{write_json, write_table, Input};
use crate::failure::Failure;

#[derive(Debug, Args)]
pub struct UnmixCmd {
    /// Dataset directory written by `synth` (enables ground-truth scoring).
    #[arg(long)]
    pub data: Option<PathBuf>,

    /// Bare pixel matrix file (`.csv` or `.bin`).
    #[arg(long)]
    pub pixels: Option<PathBuf>,

    #[command(flatten)]
    pub unmix: UnmixArgs,

    /// Directory for the report, selection, trace and spectra files.
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    pub format: TableFormat,
}

#[derive(Debug, Serialize)]
struct TraceRow {
    step: usize,
    selected_index: usize,
    selection_score: f64,
    residual_frobenius: f64,
    stopping_statistic: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SelectedRow {
    order: usize,
    index: usize,
}

fn trace_rows(result: &SompResult) -> Vec<TraceRow> {
    result
        .trace
        .records
        .iter()
        .enumerate()
        .map(|(step, r)| TraceRow {
            step: step + 1,
            selected_index: r.selected_index,
            selection_score: r.selection_score,
            residual_frobenius: r.residual_frobenius,
            stopping_statistic: r.stopping_statistic,
        })
        .collect()
}

fn ground_truth(report: &UnmixReport, instance: &MixingInstance) -> serde_json::Value {
    let reference = reference_for(instance).ok();
    let detected = reference
        .as_ref()
        .map(|r| detection(&report.selected, r, instance));
    let recovery = recovery_error(&report.selected, instance).ok();
    let angles: Vec<serde_json::Value> = recovery
        .iter()
        .flat_map(|rec| &rec.matches)
        .map(|m| {
            let angle = mrsa(
                instance.pixels.pixel(m.pixel_index),
                instance.endmembers.data().column(m.endmember),
            )
            .ok();
            json!({ "endmember": m.endmember, "pixel_index": m.pixel_index, "mrsa_deg": angle })
        })
        .collect();
    let finite: Vec<f64> = angles
        .iter()
        .filter_map(|a| a["mrsa_deg"].as_f64())
        .collect();
    let mean_mrsa = (!finite.is_empty()).then(|| finite.iter().sum::<f64>() / finite.len() as f64);
    let diag = diagnostics(instance, Some(report.delta)).ok();
    json!({
        "n_endmembers": instance.endmember_count(),
        "reference": reference,
        "detection": detected,
        "recovery_error": recovery,
        "mrsa": angles,
        "mean_mrsa_deg": mean_mrsa,
        "diagnostics": diag,
        "satisfies_thm2_bound": diag.as_ref().map(|d| d.satisfies_thm2()),
        "satisfies_thm3_bound": diag.as_ref().map(|d| d.satisfies_thm3()),
    })
}

pub fn run(cmd: &UnmixCmd) -> Result<(), Failure> {
    let input = Input::open(cmd.data.as_deref(), cmd.pixels.as_deref())?;
    let options = cmd.unmix.options()?;
    let report = unmix(input.pixels(), &options)?;
    let final_pass = report.second_pass.as_ref().unwrap_or(&report.first_pass);

    let truth = input.instance().map(|inst| ground_truth(&report, inst));
    let document = json!({
        "input": input.describe(),
        "flags": cmd.unmix.echo(),
        "n_hat": report.n_hat,
        "selected": report.selected,
        "epsilon_hat": report.epsilon_hat,
        "epsilon_estimated": report.epsilon_estimated,
        "delta": report.delta,
        "reduced_dim": report.reduced_dim,
        "stopped_by": report.first_pass.trace.stopped_by,
        "final_statistic": report.first_pass.trace.final_statistic,
        "first_pass_selected": report.first_pass.selected,
        "second_pass_selected": report.second_pass.as_ref().map(|p| &p.selected),
        "ground_truth": truth,
    });

    println!("n_hat = {}", report.n_hat);
    println!("selected = {:?}", report.selected.as_slice());
    println!("delta = {}", report.delta);
    println!("stopped_by = {:?}", report.first_pass.trace.stopped_by);
    if let Some(t) = &truth {
        println!("detection = {}", t["detection"]);
        if let Some(m) = t["mean_mrsa_deg"].as_f64() {
            println!("mean_mrsa_deg = {m:.4}");
        }
    }

    if let Some(dir) = &cmd.out {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("report.json"), &document)?;
        let selected: Vec<SelectedRow> = report
            .selected
            .iter()
            .enumerate()
            .map(|(order, index)| SelectedRow { order, index })
            .collect();
        write_table(&dir.join("selected"), &selected, cmd.format)?;
        write_table(&dir.join("trace"), &trace_rows(&report.first_pass), cmd.format)?;
        if report.second_pass.is_some() {
            write_table(&dir.join("trace_second_pass"), &trace_rows(final_pass), cmd.format)?;
        }
        save_matrix(&report.endmembers, &dir.join("endmembers_hat.csv"), MatrixFormat::Csv)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}
