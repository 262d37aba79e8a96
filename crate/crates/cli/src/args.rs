use std::path::PathBuf;

use clap::{Args, ValueEnum};
use sdsomp_core::noise::NoiseOptions;
use sdsomp_core::{Stopping, UnmixOptions};

use crate::failure::{usage, Failure};

/// Parse a finite or infinite positive number (`inf` accepted).
pub fn parse_extended(s: &str) -> Result<f64, String> {
    match s.to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
        other => other
            .parse::<f64>()
            .map_err(|_| format!("'{s}' is not a number or 'inf'")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StopArg {
    /// Stop once the projected residual vanishes (noiseless data).
    Residual,
    Rule1,
    Rule2,
    /// Exactly `--iterations` selections.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatrixFormatArg {
    Csv,
    Bin,
}

#[derive(Debug, Clone, Args)]
pub struct UnmixArgs {
    /// Order of the row norm in the greedy score; `inf` is the projection form.
    #[arg(long, default_value = "inf", value_parser = parse_extended)]
    pub q: f64,

    #[arg(long, value_enum, default_value_t = StopArg::Rule2)]
    pub stop: StopArg,

    /// Selection count for `--stop fixed`.
    #[arg(long)]
    pub iterations: Option<usize>,

    /// delta = multiplier * epsilon.
    #[arg(long, default_value_t = 2.0)]
    pub delta_mult: f64,

    /// Known noise bound; skips estimation.
    #[arg(long)]
    pub epsilon: Option<f64>,

    /// Reduce to an affine set of this dimension before selection.
    #[arg(long, value_name = "N_MAX")]
    pub asf_dr: Option<usize>,

    /// Re-select N-hat pixels after an exact (N-hat - 1)-dimensional reduction.
    #[arg(long)]
    pub exact_pass: bool,

    /// Hard cap on the number of selections.
    #[arg(long)]
    pub max_endmembers: Option<usize>,

    /// Quantile of the estimated noise norms taken as epsilon.
    #[arg(long, default_value_t = 1.0)]
    pub noise_quantile: f64,
}

impl UnmixArgs {
    pub fn options(&self) -> Result<UnmixOptions, Failure> {
        let stopping = match (self.stop, self.iterations) {
            (StopArg::Residual, None) => Stopping::NoiselessResidual,
            (StopArg::Rule1, None) => Stopping::Rule1,
            (StopArg::Rule2, None) => Stopping::Rule2,
            (StopArg::Fixed, Some(k)) => Stopping::FixedIterations(k),
            (StopArg::Fixed, None) => return Err(usage("--stop fixed requires --iterations")),
            (_, Some(_)) => return Err(usage("--iterations applies only to --stop fixed")),
        };
        Ok(UnmixOptions {
            q: self.q,
            stopping,
            delta_multiplier: self.delta_mult,
            epsilon: self.epsilon,
            asf_dr: self.asf_dr,
            exact_second_pass: self.exact_pass,
            noise: NoiseOptions {
                quantile: self.noise_quantile,
                ..NoiseOptions::default()
            },
            max_endmembers: self.max_endmembers,
            ..UnmixOptions::default()
        })
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::json!({
            "q": fmt_extended(self.q),
            "stop": format!("{:?}", self.stop).to_lowercase(),
            "iterations": self.iterations,
            "delta_mult": self.delta_mult,
            "epsilon": self.epsilon,
            "asf_dr": self.asf_dr,
            "exact_pass": self.exact_pass,
            "max_endmembers": self.max_endmembers,
            "noise_quantile": self.noise_quantile,
        })
    }
}

/// Scene template shared by `synth` and `sweep`.
#[derive(Debug, Clone, Args)]
pub struct SceneArgs {
    /// Number of endmembers.
    #[arg(long, default_value_t = 5)]
    pub n: usize,

    /// Number of pixels.
    #[arg(long, default_value_t = 500)]
    pub l: usize,

    /// Number of bands (ignored with --library).
    #[arg(long, default_value_t = 50)]
    pub m: usize,

    /// Signal-to-noise ratio in dB, or `inf`.
    #[arg(long, default_value = "inf", value_parser = parse_extended)]
    pub snr: f64,

    /// Pure pixel level in (1/N, 1].
    #[arg(long, default_value_t = 1.0)]
    pub purity: f64,

    /// Planted pure pixels per endmember.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,

    /// Matrix file whose columns are candidate endmember spectra.
    #[arg(long)]
    pub library: Option<PathBuf>,
}

/// Text form of a possibly infinite number, as accepted by `parse_extended`.
pub fn fmt_extended(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        v.to_string()
    }
}

/// Grid given as `a,b,c` or `start:stop:step` (inclusive).
pub fn parse_grid(s: &str) -> Result<Vec<f64>, Failure> {
    let bad = || usage(format!("cannot parse grid '{s}'"));
    if s.contains(':') {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        let [start, stop, step] = parts[..] else {
            return Err(bad());
        };
        if !(step > 0.0) || stop < start {
            return Err(usage("grid needs step > 0 and stop >= start"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        // Rounded to 12 decimals so 0.7 + 3 * 0.05 prints as 0.85.
        Ok((0..=count)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect())
    } else {
        s.split(',')
            .map(|p| parse_extended(p.trim()).map_err(|_| bad()))
            .collect()
    }
}
