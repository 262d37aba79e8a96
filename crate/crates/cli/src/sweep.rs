use std::fs;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use serde_json::json;
use sdsomp_core::experiment::{run_point, summarize, SweepAxis, SweepRow, SweepSpec};

use crate::args::{fmt_extended, parse_grid, SceneArgs, TableFormat, UnmixArgs};
use crate::dataset::{write_json, write_table};
use crate::failure::{usage, Failure};
use crate::svg::{line_plot, Series};

#[derive(Debug, Args)]
pub struct SweepCmd {
    /// snr | nmax | purity | n-endmembers
    #[arg(long)]
    pub axis: String,

    /// Grid as `a,b,c` or inclusive `start:stop:step`.
    #[arg(long, allow_hyphen_values = true)]
    pub values: String,

    #[arg(long, default_value_t = 50)]
    pub trials: usize,

    /// Master seed; every trial seed derives from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[command(flatten)]
    pub scene: SceneArgs,

    #[command(flatten)]
    pub unmix: UnmixArgs,

    /// Directory for the summary, per-trial and manifest files.
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    pub format: TableFormat,

    /// Also write `plot.svg` (detection probability with one-SE bars).
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Serialize)]
struct TrialRow {
    axis_value: f64,
    trial: usize,
    seed: u64,
    detected: bool,
    n_hat: Option<usize>,
    epsilon_hat: Option<f64>,
    runtime_s: f64,
    error: Option<String>,
}

pub fn run(cmd: &SweepCmd) -> Result<(), Failure> {
    let axis: SweepAxis = cmd.axis.parse()?;
    let values = parse_grid(&cmd.values)?;
    if cmd.trials == 0 {
        return Err(usage("--trials must be >= 1"));
    }
    let (base, source) = cmd.scene.params(0)?;
    let spec = SweepSpec {
        axis,
        values: values.clone(),
        trials: cmd.trials,
        base,
        unmix: cmd.unmix.options()?,
        master_seed: cmd.seed,
    };

    let mut rows: Vec<SweepRow> = Vec::with_capacity(values.len());
    let mut trials = Vec::new();
    println!(
        "{:>12} {:>8} {:>8} {:>12} {:>9}",
        axis.name(),
        "Pd",
        "SE",
        "N_hat",
        "failures"
    );
    for (i, &v) in values.iter().enumerate() {
        let outcomes = run_point(&spec, i)?;
        let row = summarize(v, &outcomes)?;
        println!(
            "{:>12} {:>8.3} {:>8.3} {:>12} {:>9}{}",
            fmt_extended(v),
            row.detection_probability,
            row.standard_error,
            row.table_entry,
            row.failures,
            if row.failures > 0 { "  (partial failure)" } else { "" }
        );
        trials.extend(outcomes.into_iter().map(|o| TrialRow {
            axis_value: v,
            trial: o.trial,
            seed: o.seed,
            detected: o.detected,
            n_hat: o.n_hat,
            epsilon_hat: o.epsilon_hat,
            runtime_s: o.runtime_s,
            error: o.error,
        }));
        rows.push(row);
    }

    if let Some(dir) = &cmd.out {
        fs::create_dir_all(dir)?;
        write_table(&dir.join("sweep"), &rows, cmd.format)?;
        write_table(&dir.join("trials"), &trials, cmd.format)?;
        let s = &cmd.scene;
        write_json(
            &dir.join("sweep_manifest.json"),
            &json!({
                "axis": axis.name(),
                "values": values.iter().map(|&v| fmt_extended(v)).collect::<Vec<_>>(),
                "trials": cmd.trials,
                "master_seed": cmd.seed,
                "scene": {
                    "n": s.n, "l": s.l, "m": s.m, "snr_db": fmt_extended(s.snr),
                    "purity": s.purity, "repeats": s.repeats, "endmember_source": source,
                },
                "flags": cmd.unmix.echo(),
            }),
        )?;
        if cmd.svg {
            let points: Vec<(f64, f64, f64)> = rows
                .iter()
                .map(|r| (r.axis_value, r.detection_probability, r.standard_error))
                .collect();
            let svg = line_plot(&Series {
                x_label: axis.name(),
                y_label: "detection probability",
                title: &format!("Detection vs {} ({} trials/point)", axis.name(), cmd.trials),
                points: &points,
                y_range: (0.0, 1.0),
            });
            fs::write(dir.join("plot.svg"), svg)?;
        }
        println!("wrote {}", dir.display());
    } else if cmd.svg {
        return Err(usage("--svg needs --out"));
    }
    Ok(())
}
