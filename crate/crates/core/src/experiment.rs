//! End-to-end unmixing pipeline and seeded Monte-Carlo experiments.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::greedy::{run_sd_somp, SompConfig, SompResult, Stopping};
use crate::metrics::{detection, detection_probability, model_order_stats, standard_error};
use crate::model::{
    fit_affine_set, generate_synthetic, nearest_pure_indices, IndexSet, MixingInstance,
    PixelMatrix, SynthParams,
};
use crate::noise::{delta_from_epsilon, estimate_noise_with, NoiseOptions};
use crate::simplexls::FclsOptions;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnmixOptions {
    pub q: f64,
    pub stopping: Stopping,
    pub delta_multiplier: f64,
    /// Known noise bound; skips estimation when set.
    pub epsilon: Option<f64>,
    /// Affine-set dimension for the inexact reduction step.
    pub asf_dr: Option<usize>,
    /// Re-run with an exact `(N̂ - 1)`-dimensional reduction and `N̂` picks.
    pub exact_second_pass: bool,
    pub noise: NoiseOptions,
    pub max_endmembers: Option<usize>,
    pub residual_floor: f64,
    pub fcls: FclsOptions,
}

impl Default for UnmixOptions {
    fn default() -> Self {
        Self {
            q: f64::INFINITY,
            stopping: Stopping::Rule2,
            delta_multiplier: 2.0,
            epsilon: None,
            asf_dr: None,
            exact_second_pass: false,
            noise: NoiseOptions::default(),
            max_endmembers: None,
            residual_floor: 1e-9,
            fcls: FclsOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UnmixReport {
    pub selected: IndexSet,
    pub n_hat: usize,
    /// Noise bound used for `δ`.
    pub epsilon_hat: Option<f64>,
    pub epsilon_estimated: bool,
    pub delta: f64,
    pub reduced_dim: Option<usize>,
    pub first_pass: SompResult,
    pub second_pass: Option<SompResult>,
    /// Original spectra of the selected pixels, `M x N̂`.
    pub endmembers: DMatrix<f64>,
}

fn uses_delta(stopping: Stopping) -> bool {
    matches!(stopping, Stopping::Rule1 | Stopping::Rule2)
}

/// Noise estimation, optional affine-set reduction, greedy selection and an
/// optional exact second pass.
pub fn unmix(pixels: &PixelMatrix, options: &UnmixOptions) -> Result<UnmixReport> {
    if !(options.delta_multiplier >= 0.0) {
        return Err(invalid("delta multiplier must be >= 0"));
    }
    if let Some(e) = options.epsilon {
        if !(e >= 0.0) {
            return Err(invalid("epsilon must be >= 0"));
        }
    }
    let noise = match (options.epsilon, uses_delta(options.stopping)) {
        (None, true) => Some(estimate_noise_with(pixels, options.noise)?),
        _ => None,
    };

    // Projection onto the fitted affine set never lengthens a noise vector,
    // so the full-data bound remains valid after reduction.
    let epsilon_hat = options.epsilon.or(noise.as_ref().map(|n| n.epsilon_hat));
    let (work, reduced_dim) = match options.asf_dr {
        Some(r) => (fit_affine_set(pixels, r)?.reconstruct(pixels)?, Some(r)),
        None => (pixels.clone(), None),
    };
    let delta = match epsilon_hat {
        Some(e) => delta_from_epsilon(e, options.delta_multiplier)?,
        None => 0.0,
    };

    let config = SompConfig {
        q: options.q,
        stopping: options.stopping,
        delta,
        max_endmembers: options.max_endmembers,
        residual_floor: options.residual_floor,
        fcls: options.fcls,
    };
    let first_pass = run_sd_somp(&work, &config)?;

    let n_first = first_pass.selected.len();
    let second_pass = if options.exact_second_pass && n_first >= 2 {
        let exact = fit_affine_set(pixels, n_first - 1)?.reconstruct(pixels)?;
        let cfg = SompConfig {
            stopping: Stopping::FixedIterations(n_first),
            ..config
        };
        Some(run_sd_somp(&exact, &cfg)?)
    } else {
        None
    };

    let selected = second_pass
        .as_ref()
        .unwrap_or(&first_pass)
        .selected
        .clone();
    Ok(UnmixReport {
        n_hat: selected.len(),
        endmembers: pixels.select(selected.as_slice()),
        selected,
        epsilon_hat,
        epsilon_estimated: noise.is_some() && options.epsilon.is_none(),
        delta,
        reduced_dim,
        first_pass,
        second_pass,
    })
}

/// The index set a trial is scored against: planted pure pixels when they
/// are exactly pure, otherwise the nearest-pure pixels.
pub fn reference_for(instance: &MixingInstance) -> Result<IndexSet> {
    if instance.purity >= 1.0 {
        Ok(instance.reference_set())
    } else {
        nearest_pure_indices(instance)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub detected: bool,
    pub n_hat: Option<usize>,
    pub epsilon_hat: Option<f64>,
    pub runtime_s: f64,
    pub error: Option<String>,
}

/// Generate one scene, unmix it and score the result. Failures are reported
/// in the outcome rather than propagated.
pub fn run_trial(params: &SynthParams, options: &UnmixOptions, trial: usize) -> TrialOutcome {
    let start = Instant::now();
    let result = generate_synthetic(params).and_then(|inst| {
        let reference = reference_for(&inst)?;
        let report = unmix(&inst.pixels, options)?;
        Ok((detection(&report.selected, &reference, &inst), report))
    });
    let runtime_s = start.elapsed().as_secs_f64();
    match result {
        Ok((detected, report)) => TrialOutcome {
            trial,
            seed: params.seed,
            detected,
            n_hat: Some(report.n_hat),
            epsilon_hat: report.epsilon_hat,
            runtime_s,
            error: None,
        },
        Err(e) => TrialOutcome {
            trial,
            seed: params.seed,
            detected: false,
            n_hat: None,
            epsilon_hat: None,
            runtime_s,
            error: Some(e.to_string()),
        },
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at grid point `point`; a pure function of its
/// arguments so any trial can be replayed alone.
pub fn trial_seed(master: u64, point: usize, trial: usize) -> u64 {
    let counter = ((point as u64) << 32) ^ trial as u64;
    splitmix64(master ^ splitmix64(counter))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Snr,
    Nmax,
    Purity,
    NEndmembers,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Snr => "snr",
            SweepAxis::Nmax => "nmax",
            SweepAxis::Purity => "purity",
            SweepAxis::NEndmembers => "n-endmembers",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "snr" => Ok(SweepAxis::Snr),
            "nmax" => Ok(SweepAxis::Nmax),
            "purity" => Ok(SweepAxis::Purity),
            "n-endmembers" | "n" => Ok(SweepAxis::NEndmembers),
            other => Err(invalid(format!("unknown sweep axis '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub trials: usize,
    /// Scene template; its seed is replaced per trial.
    pub base: SynthParams,
    pub unmix: UnmixOptions,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub trials: usize,
    pub failures: usize,
    pub detection_probability: f64,
    pub standard_error: f64,
    pub n_hat_mean: f64,
    pub n_hat_std: f64,
    pub table_entry: String,
    pub runtime_s: f64,
}

/// Scene parameters and unmixing options for one grid value.
pub fn apply_axis(
    axis: SweepAxis,
    value: f64,
    base: &SynthParams,
    options: &UnmixOptions,
) -> Result<(SynthParams, UnmixOptions)> {
    let mut p = base.clone();
    let mut o = *options;
    let as_count = |v: f64| {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(invalid(format!("axis value {v} must be a positive integer")))
        }
    };
    match axis {
        SweepAxis::Snr => p.snr_db = value,
        SweepAxis::Purity => p.purity = value,
        SweepAxis::Nmax => o.asf_dr = Some(as_count(value)?),
        SweepAxis::NEndmembers => p.n_endmembers = as_count(value)?,
    }
    Ok((p, o))
}

/// Every trial of one grid point, in trial order.
pub fn run_point(spec: &SweepSpec, point: usize) -> Result<Vec<TrialOutcome>> {
    let value = *spec
        .values
        .get(point)
        .ok_or_else(|| invalid("grid point out of range"))?;
    let (params, options) = apply_axis(spec.axis, value, &spec.base, &spec.unmix)?;
    Ok((0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let mut p = params.clone();
            p.seed = trial_seed(spec.master_seed, point, t);
            run_trial(&p, &options, t)
        })
        .collect())
}

pub fn summarize(axis_value: f64, outcomes: &[TrialOutcome]) -> Result<SweepRow> {
    let detections: Vec<bool> = outcomes.iter().map(|o| o.detected).collect();
    let pd = detection_probability(&detections)?;
    let orders: Vec<usize> = outcomes.iter().filter_map(|o| o.n_hat).collect();
    let (mean, std, entry) = match model_order_stats(&orders) {
        Ok(s) => (s.mean, s.std, s.table_entry()),
        Err(_) => (f64::NAN, f64::NAN, "n/a".into()),
    };
    Ok(SweepRow {
        axis_value,
        trials: outcomes.len(),
        failures: outcomes.iter().filter(|o| o.error.is_some()).count(),
        detection_probability: pd,
        standard_error: standard_error(pd, outcomes.len()),
        n_hat_mean: mean,
        n_hat_std: std,
        table_entry: entry,
        runtime_s: outcomes.iter().map(|o| o.runtime_s).sum(),
    })
}

pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.trials == 0 {
        return Err(invalid("trials must be >= 1"));
    }
    if spec.values.is_empty() {
        return Err(invalid("sweep grid is empty"));
    }
    (0..spec.values.len())
        .map(|i| summarize(spec.values[i], &run_point(spec, i)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EndmemberSource;

    fn base(snr: f64) -> SynthParams {
        SynthParams {
            n_endmembers: 3,
            n_pixels: 120,
            source: EndmemberSource::Random { bands: 20 },
            snr_db: snr,
            purity: 1.0,
            pure_repeats: 1,
            seed: 0,
        }
    }

    #[test]
    fn noiseless_pipeline() {
        let inst = generate_synthetic(&base(f64::INFINITY)).unwrap();
        let opts = UnmixOptions {
            stopping: Stopping::NoiselessResidual,
            ..UnmixOptions::default()
        };
        let rep = unmix(&inst.pixels, &opts).unwrap();
        assert_eq!(rep.n_hat, 3);
        assert!(detection(&rep.selected, &inst.reference_set(), &inst));
        assert_eq!(rep.endmembers.ncols(), 3);
        assert!(rep.epsilon_hat.is_none());
    }

    #[test]
    fn noisy_pipeline_with_reduction() {
        let inst = generate_synthetic(&base(40.0)).unwrap();
        for (asf, exact) in [(None, false), (Some(6), false), (Some(6), true)] {
            let opts = UnmixOptions {
                asf_dr: asf,
                exact_second_pass: exact,
                ..UnmixOptions::default()
            };
            let rep = unmix(&inst.pixels, &opts).unwrap();
            assert_eq!(rep.n_hat, 3, "{asf:?} {exact}");
            assert!((rep.delta - 2.0 * rep.epsilon_hat.unwrap()).abs() < 1e-15);
            assert_eq!(rep.second_pass.is_some(), exact);
        }
    }

    #[test]
    fn explicit_epsilon_is_used() {
        let inst = generate_synthetic(&base(40.0)).unwrap();
        let opts = UnmixOptions {
            epsilon: Some(0.05),
            delta_multiplier: 3.0,
            ..UnmixOptions::default()
        };
        let rep = unmix(&inst.pixels, &opts).unwrap();
        assert!(!rep.epsilon_estimated);
        assert!((rep.delta - 0.15).abs() < 1e-15);
    }

    #[test]
    fn seeds_are_stable_and_distinct() {
        assert_eq!(trial_seed(7, 1, 2), trial_seed(7, 1, 2));
        let mut seen: Vec<u64> = (0..4)
            .flat_map(|p| (0..50).map(move |t| trial_seed(7, p, t)))
            .collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 200);
        assert_ne!(trial_seed(7, 0, 0), trial_seed(8, 0, 0));
    }

    #[test]
    fn sweep_is_reproducible() {
        let spec = SweepSpec {
            axis: SweepAxis::Snr,
            values: vec![20.0, 40.0],
            trials: 4,
            base: base(0.0),
            unmix: UnmixOptions::default(),
            master_seed: 3,
        };
        let a = run_sweep(&spec).unwrap();
        let b = run_sweep(&spec).unwrap();
        assert_eq!(a.len(), 2);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.detection_probability, y.detection_probability);
            assert_eq!(x.table_entry, y.table_entry);
        }
        let outcomes = run_point(&spec, 1).unwrap();
        let mut p = spec.base.clone();
        p.snr_db = 40.0;
        p.seed = trial_seed(3, 1, 2);
        let alone = run_trial(&p, &spec.unmix, 2);
        assert_eq!(alone.n_hat, outcomes[2].n_hat);
        assert_eq!(alone.detected, outcomes[2].detected);
    }

    #[test]
    fn failed_trials_are_flagged() {
        let mut p = base(30.0);
        p.n_pixels = 2;
        let out = run_trial(&p, &UnmixOptions::default(), 0);
        assert!(out.error.is_some());
        assert!(!out.detected);
        let row = summarize(30.0, &[out]).unwrap();
        assert_eq!(row.failures, 1);
        assert_eq!(row.table_entry, "n/a");
    }

    #[test]
    fn axis_parsing_and_application() {
        assert_eq!("n-endmembers".parse::<SweepAxis>().unwrap(), SweepAxis::NEndmembers);
        assert!("bogus".parse::<SweepAxis>().is_err());
        let (p, o) = apply_axis(SweepAxis::Nmax, 7.0, &base(30.0), &UnmixOptions::default()).unwrap();
        assert_eq!(o.asf_dr, Some(7));
        assert_eq!(p.snr_db, 30.0);
        assert!(apply_axis(SweepAxis::NEndmembers, 2.5, &base(30.0), &UnmixOptions::default()).is_err());
    }
}
