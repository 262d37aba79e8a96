//! Detection, model-order and spectral-angle metrics.

use nalgebra::DVectorView;
use serde::Serialize;

use crate::error::{dim, invalid, Error, Result};
use crate::model::{IndexSet, MixingInstance};

/// Whether `estimated` identifies the same endmembers as `reference`: equal
/// size and a one-to-one pairing with identical ground-truth abundance
/// columns, so any repeat of a pure pixel counts as a hit.
pub fn detection(estimated: &IndexSet, reference: &IndexSet, instance: &MixingInstance) -> bool {
    let s = instance.abundances.data();
    let l = s.ncols();
    if estimated.len() != reference.len() || estimated.len() != instance.endmember_count() {
        return false;
    }
    if estimated.iter().chain(reference.iter()).any(|n| n >= l) {
        return false;
    }
    let mut used = vec![false; reference.len()];
    for e in estimated.iter() {
        let hit = reference
            .iter()
            .enumerate()
            .find(|&(j, r)| !used[j] && s.column(e) == s.column(r));
        match hit {
            Some((j, _)) => used[j] = true,
            None => return false,
        }
    }
    true
}

pub fn detection_probability(trials: &[bool]) -> Result<f64> {
    if trials.is_empty() {
        return Err(invalid("no trials"));
    }
    Ok(trials.iter().filter(|&&t| t).count() as f64 / trials.len() as f64)
}

/// Binomial standard error `sqrt(p (1 - p) / n)`.
pub fn standard_error(p: f64, trials: usize) -> f64 {
    if trials == 0 {
        return f64::NAN;
    }
    (p * (1.0 - p) / trials as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelOrderStats {
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator; 0 for one trial).
    pub std: f64,
    pub trials: usize,
}

impl ModelOrderStats {
    /// Table style, e.g. `4±0` or `19.4±1.14`.
    pub fn table_entry(&self) -> String {
        format!("{}±{}", compact(self.mean), compact(self.std))
    }
}

fn compact(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

pub fn model_order_stats(estimates: &[usize]) -> Result<ModelOrderStats> {
    if estimates.is_empty() {
        return Err(invalid("no estimates"));
    }
    let n = estimates.len() as f64;
    let mean = estimates.iter().map(|&v| v as f64).sum::<f64>() / n;
    let std = if estimates.len() < 2 {
        0.0
    } else {
        let ss: f64 = estimates.iter().map(|&v| (v as f64 - mean).powi(2)).sum();
        (ss / (n - 1.0)).sqrt()
    };
    Ok(ModelOrderStats {
        mean,
        std,
        trials: estimates.len(),
    })
}

/// Mean-removed spectral angle in degrees.
pub fn mrsa(estimate: DVectorView<'_, f64>, reference: DVectorView<'_, f64>) -> Result<f64> {
    if estimate.len() != reference.len() {
        return Err(dim("spectra differ in length"));
    }
    if estimate.is_empty() {
        return Err(dim("empty spectra"));
    }
    let a = estimate.add_scalar(-estimate.mean());
    let b = reference.add_scalar(-reference.mean());
    let (na, nb) = (a.norm(), b.norm());
    let scale = estimate.amax().max(reference.amax()).max(f64::MIN_POSITIVE);
    if na <= 1e-14 * scale * (a.len() as f64).sqrt() || nb <= 1e-14 * scale * (b.len() as f64).sqrt() {
        return Err(Error::Degenerate("spectral angle of a constant spectrum".into()));
    }
    let (ua, ub) = (a / na, b / nb);
    Ok((2.0 * (&ua - &ub).norm().atan2((&ua + &ub).norm())).to_degrees())
}
