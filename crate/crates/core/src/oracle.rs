//! Ground truth for small instances and theory-side diagnostics.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::greedy::FEASIBILITY_SLACK;
use crate::model::{AbundanceMatrix, IndexSet, MixingInstance, PixelMatrix};
use crate::simplexls::{FclsOptions, FclsSolver};

/// Largest `L` accepted by [`solve_sdmmv_bruteforce`].
pub const BRUTEFORCE_MAX_PIXELS: usize = 16;

/// Half-open interval `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v < self.hi
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo < self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryDiagnostics {
    pub sigma_min: f64,
    pub max_endmember_norm: f64,
    /// `+inf` when some endmember has no non-pure column to compare against.
    pub d_s: f64,
    /// `max(1, max_i ||a_i||^2 / σ_min^2)`.
    pub eta_proxy: f64,
    /// Noise bound `ε = max_n ||v[n]||`.
    pub epsilon: f64,
    pub thm2_eps_bound: f64,
    pub thm3_eps_bound: f64,
    pub delta_window_thm2: Window,
    pub delta_window_thm3: Window,
    pub delta: Option<f64>,
    /// `2(δ + 2ε) / σ_min` for the supplied `δ`.
    pub coverage_radius: Option<f64>,
    /// `2(δ + 2ε) max_i ||a_i|| / σ_min + ε` for the supplied `δ`.
    pub endmember_error_bound: Option<f64>,
}

impl TheoryDiagnostics {
    pub fn satisfies_thm2(&self) -> bool {
        self.epsilon < self.thm2_eps_bound
    }

    pub fn satisfies_thm3(&self) -> bool {
        self.epsilon < self.thm3_eps_bound
    }
}

fn d_s_inner(abundances: &AbundanceMatrix) -> Result<Vec<f64>> {
    let s = abundances.data();
    let mut per_k = vec![f64::INFINITY; s.nrows()];
    for n in 0..s.ncols() {
        let pure = abundances.pure_endmember(n);
        let col = s.column(n);
        for (k, best) in per_k.iter_mut().enumerate() {
            if pure == Some(k) {
                continue;
            }
            let l1: f64 = col
                .iter()
                .enumerate()
                .map(|(i, &v)| if i == k { (1.0 - v).abs() } else { v.abs() })
                .sum();
            let identity = 2.0 * (1.0 - col[k]);
            if (l1 - identity).abs() > 1e-8 {
                return Err(Error::Numerical(format!(
                    "l1 distance {l1} disagrees with 2(1 - s_k) = {identity} at pixel {n}"
                )));
            }
            *best = best.min(l1);
        }
    }
    Ok(per_k)
}

/// `d(S) = min_k min_{s[n] != e_k} ||e_k - s[n]||_1`.
pub fn compute_d_s(abundances: &AbundanceMatrix) -> Result<f64> {
    let per_k = d_s_inner(abundances)?;
    if let Some(k) = per_k.iter().position(|v| v.is_infinite()) {
        return Err(Error::Degenerate(format!(
            "every pixel is pure for endmember {k}"
        )));
    }
    Ok(per_k.into_iter().fold(f64::INFINITY, f64::min))
}

pub fn diagnostics(instance: &MixingInstance, delta: Option<f64>) -> Result<TheoryDiagnostics> {
    let a = instance.endmembers.data();
    let sigma_min = instance.endmembers.sigma_min();
    let max_endmember_norm = a.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let d_s = d_s_inner(&instance.abundances)?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let eta_proxy = (max_endmember_norm * max_endmember_norm / (sigma_min * sigma_min)).max(1.0);
    let n = instance.endmember_count() as f64;
    let eps = instance.noise_bound_true;
    let md = d_s.min(1.0);
    if let Some(d) = delta {
        if !(d >= 0.0) {
            return Err(invalid("delta must be >= 0"));
        }
    }
    Ok(TheoryDiagnostics {
        sigma_min,
        max_endmember_norm,
        d_s,
        eta_proxy,
        epsilon: eps,
        thm2_eps_bound: sigma_min * md / 8.0,
        thm3_eps_bound: sigma_min * md / (4.0 * n.sqrt() * eta_proxy),
        delta_window_thm2: Window {
            lo: 2.0 * eps,
            hi: sigma_min / 2.0 - 2.0 * eps,
        },
        delta_window_thm3: Window {
            lo: 2.0 * eps,
            hi: sigma_min - 2.0 * eps,
        },
        delta,
        coverage_radius: delta.map(|d| 2.0 * (d + 2.0 * eps) / sigma_min),
        endmember_error_bound: delta
            .map(|d| 2.0 * (d + 2.0 * eps) * max_endmember_norm / sigma_min + eps),
    })
}

/// Whether every pixel lies within `δ` (plus solver slack) of the convex
/// hull of the columns in `support`.
pub fn support_is_feasible(
    pixels: &PixelMatrix,
    support: &[usize],
    delta: f64,
    fcls: FclsOptions,
) -> Result<bool> {
    if support.is_empty() {
        return Ok(false);
    }
    let dict = pixels.select(support);
    let solver = FclsSolver::new(&dict, fcls)?;
    let threshold = delta + FEASIBILITY_SLACK;
    for n in 0..pixels.pixel_count() {
        if support.contains(&n) {
            continue;
        }
        if solver.solve(pixels.pixel(n))?.residual_norm > threshold {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Exhaustive row-sparsity minimisation: the smallest support (ties broken
/// lexicographically) from which every pixel is an FCLS fit within `δ`.
pub fn solve_sdmmv_bruteforce(
    pixels: &PixelMatrix,
    delta: f64,
    fcls: FclsOptions,
) -> Result<IndexSet> {
    let l = pixels.pixel_count();
    if l > BRUTEFORCE_MAX_PIXELS {
        return Err(invalid(format!(
            "brute force is limited to {BRUTEFORCE_MAX_PIXELS} pixels, got {l}"
        )));
    }
    if !(delta >= 0.0) {
        return Err(invalid("delta must be >= 0"));
    }
    for k in 1..=l {
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            if support_is_feasible(pixels, &combo, delta, fcls)? {
                return IndexSet::from_vec(combo);
            }
            if !next_combination(&mut combo, l) {
                break;
            }
        }
    }
    Err(Error::Numerical(
        "the full support was reported infeasible".into(),
    ))
}

/// Advance to the next `k`-subset of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Residuals `||x[n] - X_Λ s[n]||` of the abundance-weighted combination of
/// one planted pixel per endmember (the reference set).
pub fn planted_combination_residuals(instance: &MixingInstance) -> Result<Vec<f64>> {
    let reference = instance.reference_set();
    if reference.len() != instance.endmember_count() {
        return Err(invalid("instance lacks a planted pixel for every endmember"));
    }
    let dict = instance.pixels.select(reference.as_slice());
    let s = instance.abundances.data();
    Ok((0..instance.pixels.pixel_count())
        .map(|n| (instance.pixels.pixel(n) - &dict * s.column(n)).norm())
        .collect())
}

/// Whether `support` holds, for every endmember `k`, a pixel with
/// `||e_k - s[n]||_1 <= radius`. For `radius < 1` the witnesses are distinct.
pub fn covers_all_endmembers_within(
    support: &[usize],
    abundances: &AbundanceMatrix,
    radius: f64,
) -> bool {
    let s = abundances.data();
    (0..s.nrows()).all(|k| {
        support
            .iter()
            .any(|&n| 2.0 * (1.0 - s[(k, n)]) <= radius + 1e-12)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchedEndmember {
    pub endmember: usize,
    /// Position in the estimated index set.
    pub estimate_position: usize,
    pub pixel_index: usize,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryError {
    /// One entry per matched endmember, ordered by endmember.
    pub matches: Vec<MatchedEndmember>,
    pub total: f64,
}

impl RecoveryError {
    pub fn max_error(&self) -> f64 {
        self.matches.iter().map(|m| m.error).fold(0.0, f64::max)
    }
}

/// Minimum-total-distance matching between estimated pixels and true
/// endmembers; unmatched items on the larger side are left out.
pub fn recovery_error(estimated: &IndexSet, instance: &MixingInstance) -> Result<RecoveryError> {
    if estimated.is_empty() {
        return Err(invalid("empty estimate"));
    }
    if let Some(bad) = estimated.iter().find(|&n| n >= instance.pixels.pixel_count()) {
        return Err(invalid(format!("index {bad} out of range")));
    }
    let a = instance.endmembers.data();
    let (e, n) = (estimated.len(), a.ncols());
    let size = e.max(n);
    let mut cost = DMatrix::zeros(size, size);
    for (j, idx) in estimated.iter().enumerate() {
        let x: DVector<f64> = instance.pixels.pixel(idx).clone_owned();
        for k in 0..n {
            cost[(j, k)] = (&x - a.column(k)).norm();
        }
    }
    let (assignment, _) = min_cost_assignment(&cost);
    let mut matches: Vec<MatchedEndmember> = assignment
        .iter()
        .enumerate()
        .filter(|&(j, &k)| j < e && k < n)
        .map(|(j, &k)| MatchedEndmember {
            endmember: k,
            estimate_position: j,
            pixel_index: estimated.as_slice()[j],
            error: cost[(j, k)],
        })
        .collect();
    matches.sort_by_key(|m| m.endmember);
    let total = matches.iter().map(|m| m.error).sum();
    Ok(RecoveryError { matches, total })
}

/// Hungarian algorithm on a square cost matrix. Returns the column assigned
/// to each row and the total cost.
pub fn min_cost_assignment(cost: &DMatrix<f64>) -> (Vec<usize>, f64) {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "cost matrix must be square");
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    // Potentials u (rows), v (columns); p[j] = row matched to column j, 1-based
    // with column 0 as the sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    let total = (0..n).map(|i| cost[(i, assignment[i])]).sum();
    (assignment, total)
}
