//! Greedy self-dictionary selection (ℓq SD-SOMP).
//!
//! Each iteration picks the pixel whose correlation with the current residual
//! `R = P⊥ X` has the largest ℓq norm, then deflates the residual by one
//! Gram–Schmidt direction. For `q = ∞` the pick reduces to the pixel with the
//! largest projected norm `||R[:, n]||_2`, which is what the fast path
//! evaluates.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::model::{IndexSet, PixelMatrix};
use crate::simplexls::{FclsOptions, FclsSolver};

/// Absolute slack added to `δ` in every FCLS feasibility comparison.
pub const FEASIBILITY_SLACK: f64 = 1e-8;

/// A newly selected column whose projected norm is at most this fraction of
/// `||X||_F` is treated as linearly dependent on the current selection.
pub const RANK_GUARD: f64 = 1e-10;

const BLOCK: usize = 64;

/// Above this pixel count the finite-q scan streams `R^T X` in blocks
/// instead of keeping the `L x L` Gram matrix.
const GRAM_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "iterations")]
pub enum Stopping {
    /// Stop once `||R||_F <= residual_floor * ||X||_F`.
    NoiselessResidual,
    /// Stop once every pixel has an FCLS residual `<= δ` on the selection.
    Rule1,
    /// Stop once the next greedy pick has an FCLS residual `<= δ`.
    Rule2,
    FixedIterations(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    NoiselessResidual,
    Rule1,
    Rule2,
    FixedIterations,
    MaxEndmembers,
    RankDeficient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SompConfig {
    /// Norm order in `(1, ∞]`; use `f64::INFINITY` for the fast path.
    pub q: f64,
    pub stopping: Stopping,
    pub delta: f64,
    /// Hard cap on `|Λ|`; clamped to `min(M, L)`.
    pub max_endmembers: Option<usize>,
    pub residual_floor: f64,
    pub fcls: FclsOptions,
}

impl Default for SompConfig {
    fn default() -> Self {
        Self {
            q: f64::INFINITY,
            stopping: Stopping::NoiselessResidual,
            delta: 0.0,
            max_endmembers: None,
            residual_floor: 1e-9,
            fcls: FclsOptions::default(),
        }
    }
}

impl SompConfig {
    pub fn new(q: f64, stopping: Stopping, delta: f64) -> Self {
        Self {
            q,
            stopping,
            delta,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 1.0) || self.q.is_nan() {
            return Err(invalid(format!("q must lie in (1, inf], got {}", self.q)));
        }
        if !(self.delta >= 0.0) {
            return Err(invalid(format!("delta must be >= 0, got {}", self.delta)));
        }
        if !(self.residual_floor >= 0.0) || !self.residual_floor.is_finite() {
            return Err(invalid("residual floor must be finite and >= 0"));
        }
        if self.max_endmembers == Some(0) {
            return Err(invalid("max_endmembers must be >= 1"));
        }
        if let Stopping::FixedIterations(0) = self.stopping {
            return Err(invalid("fixed iteration count must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionRecord {
    pub selected_index: usize,
    pub selection_score: f64,
    /// `||R_k||_F` after this selection.
    pub residual_frobenius: f64,
    /// FCLS residual evaluated by the active stopping rule when it declined
    /// to stop before this selection, if any.
    pub stopping_statistic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionTrace {
    pub records: Vec<SelectionRecord>,
    pub stopped_by: StopReason,
    /// Statistic of the test that ended the run (Rule 1 / Rule 2 only).
    pub final_statistic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SompResult {
    pub selected: IndexSet,
    pub trace: SelectionTrace,
}

/// Outcome of a stopping test; `statistic` is an FCLS residual norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleOutcome {
    pub satisfied: bool,
    pub statistic: f64,
}

/// Orthonormal basis of the selected columns, grown one vector at a time.
#[derive(Debug, Clone)]
struct Basis {
    q: Vec<DVector<f64>>,
}

impl Basis {
    fn new() -> Self {
        Self { q: Vec::new() }
    }

    /// Orthogonalise `v` against the basis (two passes) and return it
    /// together with its remaining norm.
    fn orthogonalize(&self, mut v: DVector<f64>) -> (DVector<f64>, f64) {
        for _ in 0..2 {
            for q in &self.q {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let norm = v.norm();
        (v, norm)
    }

    fn push_normalized(&mut self, v: DVector<f64>) {
        self.q.push(v);
    }
}

fn deflate(r: &mut DMatrix<f64>, q: &DVector<f64>) {
    let coeffs = r.tr_mul(q);
    r.ger(-1.0, q, &coeffs, 1.0);
}

/// `P⊥ X` for the projector onto the orthogonal complement of the span of
/// the selected columns.
pub fn residual(pixels: &PixelMatrix, selected: &IndexSet) -> Result<DMatrix<f64>> {
    let x = pixels.data();
    let scale = x.norm();
    let mut basis = Basis::new();
    for idx in selected.iter() {
        if idx >= pixels.pixel_count() {
            return Err(invalid(format!("index {idx} out of range")));
        }
        let (v, norm) = basis.orthogonalize(x.column(idx).clone_owned());
        if norm <= RANK_GUARD * scale {
            return Err(Error::RankDeficient { index: idx });
        }
        basis.push_normalized(v / norm);
    }
    let mut r = x.clone();
    for _ in 0..2 {
        for q in &basis.q {
            deflate(&mut r, q);
        }
    }
    Ok(r)
}

/// Index of the maximum; lowest index wins exact ties.
fn argmax(scores: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, s) in scores.enumerate() {
        if s > best.1 {
            best = (i, s);
        }
    }
    best
}

/// `||v||_q`, computed with rescaling to avoid overflow.
pub fn lq_norm(v: &[f64], q: f64) -> f64 {
    let amax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if q.is_infinite() || amax == 0.0 {
        return amax;
    }
    let inv = 1.0 / amax;
    let sum: f64 = if q.fract() == 0.0 && q <= 64.0 {
        let p = q as i32;
        v.iter().map(|x| (x.abs() * inv).powi(p)).sum()
    } else {
        v.iter().map(|x| (x.abs() * inv).powf(q)).sum()
    };
    amax * sum.powf(1.0 / q)
}

/// Scores `||R^T x[n]||_q` for every pixel, evaluated literally.
pub fn correlation_scores(residual: &DMatrix<f64>, pixels: &PixelMatrix, q: f64) -> Vec<f64> {
    let x = pixels.data();
    let l = x.ncols();
    let mut scores = Vec::with_capacity(l);
    let mut start = 0;
    while start < l {
        let width = BLOCK.min(l - start);
        let corr = residual.transpose() * x.columns(start, width);
        for col in corr.column_iter() {
            scores.push(lq_norm(col.as_slice(), q));
        }
        start += width;
    }
    scores
}

/// Greedy pick by the literal correlation form for any `q`, including `∞`.
pub fn greedy_select_dense(
    residual: &DMatrix<f64>,
    pixels: &PixelMatrix,
    q: f64,
) -> Result<(usize, f64)> {
    check_residual(residual, pixels)?;
    Ok(argmax(correlation_scores(residual, pixels, q).into_iter()))
}

/// Greedy pick: `argmax_n ||R^T x[n]||_q`. For `q = ∞` evaluates the
/// equivalent `argmax_n ||R[:, n]||_2` and reports the squared norm.
pub fn greedy_select(residual: &DMatrix<f64>, pixels: &PixelMatrix, q: f64) -> Result<(usize, f64)> {
    check_residual(residual, pixels)?;
    Ok(select_unchecked(residual, pixels, q))
}

fn select_unchecked(residual: &DMatrix<f64>, pixels: &PixelMatrix, q: f64) -> (usize, f64) {
    if q.is_infinite() {
        argmax(residual.column_iter().map(|c| c.norm_squared()))
    } else {
        argmax(correlation_scores(residual, pixels, q).into_iter())
    }
}

fn check_residual(residual: &DMatrix<f64>, pixels: &PixelMatrix) -> Result<()> {
    if residual.shape() != pixels.data().shape() {
        return Err(invalid("residual shape differs from pixel matrix"));
    }
    if residual.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("residual is identically zero".into()));
    }
    Ok(())
}

fn require_selection(pixels: &PixelMatrix, selected: &IndexSet) -> Result<()> {
    if selected.is_empty() {
        return Err(invalid("stopping rules need a non-empty selection"));
    }
    if let Some(bad) = selected.iter().find(|&i| i >= pixels.pixel_count()) {
        return Err(invalid(format!("index {bad} out of range")));
    }
    Ok(())
}

/// Rule 1: every pixel is within `δ` of the convex hull of the selection.
pub fn stopping_rule_1(
    pixels: &PixelMatrix,
    selected: &IndexSet,
    delta: f64,
    fcls: FclsOptions,
) -> Result<RuleOutcome> {
    require_selection(pixels, selected)?;
    let r = residual(pixels, selected)?;
    rule_1_with_residual(pixels, selected, &r, delta, fcls)
}

/// The projected norm `||R[:, n]||` lower-bounds the FCLS residual, so pixels
/// are screened by it (largest first) before any solve.
fn rule_1_with_residual(
    pixels: &PixelMatrix,
    selected: &IndexSet,
    r: &DMatrix<f64>,
    delta: f64,
    fcls: FclsOptions,
) -> Result<RuleOutcome> {
    let threshold = delta + FEASIBILITY_SLACK;
    let lower: Vec<f64> = r.column_iter().map(|c| c.norm()).collect();
    let mut order: Vec<usize> = (0..lower.len()).collect();
    order.sort_by(|&a, &b| lower[b].total_cmp(&lower[a]).then(a.cmp(&b)));
    if lower[order[0]] > threshold {
        return Ok(RuleOutcome {
            satisfied: false,
            statistic: lower[order[0]],
        });
    }
    let dict = pixels.select(selected.as_slice());
    let solver = FclsSolver::new(&dict, fcls)?;
    let mut worst = 0.0f64;
    for n in order {
        let e = solver.solve(pixels.pixel(n))?.residual_norm;
        worst = worst.max(e);
        if e > threshold {
            return Ok(RuleOutcome {
                satisfied: false,
                statistic: e,
            });
        }
    }
    Ok(RuleOutcome {
        satisfied: true,
        statistic: worst,
    })
}

/// Rule 2: the next greedy pick is within `δ` of the convex hull of the
/// selection.
pub fn stopping_rule_2(
    pixels: &PixelMatrix,
    selected: &IndexSet,
    next_index: usize,
    delta: f64,
    fcls: FclsOptions,
) -> Result<RuleOutcome> {
    require_selection(pixels, selected)?;
    if next_index >= pixels.pixel_count() {
        return Err(invalid(format!("index {next_index} out of range")));
    }
    let dict = pixels.select(selected.as_slice());
    let e = FclsSolver::new(&dict, fcls)?
        .solve(pixels.pixel(next_index))?
        .residual_norm;
    Ok(RuleOutcome {
        satisfied: e <= delta + FEASIBILITY_SLACK,
        statistic: e,
    })
}

/// Run greedy selection until the configured stopping criterion fires.
/// At least one pixel is always selected.
pub fn run_sd_somp(pixels: &PixelMatrix, config: &SompConfig) -> Result<SompResult> {
    config.validate()?;
    let x = pixels.data();
    let scale = x.norm();
    if scale == 0.0 {
        return Err(Error::Degenerate("pixel matrix is identically zero".into()));
    }
    let hard_cap = pixels.band_count().min(pixels.pixel_count());
    let cap = config.max_endmembers.map_or(hard_cap, |c| c.min(hard_cap));

    let mut r = x.clone();
    let mut basis = Basis::new();
    let mut selected = IndexSet::new();
    let mut records: Vec<SelectionRecord> = Vec::new();
    let mut pending_statistic = None;
    // R^T X = X^T P⊥ X, downdated by one rank-1 term per selection.
    let mut gram = (config.q.is_finite() && pixels.pixel_count() <= GRAM_LIMIT)
        .then(|| x.transpose() * x);

    let (stopped_by, final_statistic) = loop {
        let k = selected.len();
        if k > 0 {
            match config.stopping {
                Stopping::NoiselessResidual => {
                    if r.norm() <= config.residual_floor * scale {
                        break (StopReason::NoiselessResidual, None);
                    }
                }
                Stopping::Rule1 => {
                    let out = rule_1_with_residual(pixels, &selected, &r, config.delta, config.fcls)?;
                    if out.satisfied {
                        break (StopReason::Rule1, Some(out.statistic));
                    }
                    pending_statistic = Some(out.statistic);
                }
                Stopping::FixedIterations(n) => {
                    if k >= n {
                        break (StopReason::FixedIterations, None);
                    }
                }
                Stopping::Rule2 => {}
            }
        }
        if k >= cap {
            break (StopReason::MaxEndmembers, None);
        }

        let (n, score) = match &gram {
            Some(g) => argmax(g.column_iter().map(|c| lq_norm(c.as_slice(), config.q))),
            None => select_unchecked(&r, pixels, config.q),
        };
        if config.stopping == Stopping::Rule2 && k > 0 {
            let out = stopping_rule_2(pixels, &selected, n, config.delta, config.fcls)?;
            if out.satisfied {
                break (StopReason::Rule2, Some(out.statistic));
            }
            pending_statistic = Some(out.statistic);
        }

        let (v, norm) = basis.orthogonalize(x.column(n).clone_owned());
        if norm <= RANK_GUARD * scale || selected.contains(n) {
            break (StopReason::RankDeficient, None);
        }
        let qv = v / norm;
        deflate(&mut r, &qv);
        if let Some(g) = gram.as_mut() {
            let p = x.tr_mul(&qv);
            g.ger(-1.0, &p, &p, 1.0);
        }
        basis.push_normalized(qv);
        selected.push(n)?;
        records.push(SelectionRecord {
            selected_index: n,
            selection_score: score,
            residual_frobenius: r.norm(),
            stopping_statistic: pending_statistic.take(),
        });
    };

    Ok(SompResult {
        selected,
        trace: SelectionTrace {
            records,
            stopped_by,
            final_statistic,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_synthetic, SynthParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn px(m: usize, l: usize, vals: &[f64]) -> PixelMatrix {
        PixelMatrix::new(DMatrix::from_column_slice(m, l, vals)).unwrap()
    }

    fn random(m: usize, l: usize, seed: u64) -> PixelMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PixelMatrix::new(DMatrix::from_fn(m, l, |_, _| rng.random_range(-1.0..1.0))).unwrap()
    }

    #[test]
    fn residual_of_empty_selection_is_data() {
        let x = random(4, 6, 1);
        assert_eq!(residual(&x, &IndexSet::new()).unwrap(), *x.data());
    }

    #[test]
    fn residual_of_spanning_selection_is_zero() {
        let x = random(3, 7, 2);
        let sel = IndexSet::from_vec(vec![0, 1, 2]).unwrap();
        assert!(residual(&x, &sel).unwrap().amax() < 1e-10);
    }

    #[test]
    fn residual_matches_rank_one_projector() {
        let x = random(4, 6, 3);
        let a = x.pixel(2).clone_owned();
        let proj = DMatrix::identity(4, 4) - &a * a.transpose() / a.norm_squared();
        let expected = proj * x.data();
        let r = residual(&x, &IndexSet::from_vec(vec![2]).unwrap()).unwrap();
        assert!((r - expected).amax() < 1e-10);
    }

    #[test]
    fn residual_kills_selected_columns() {
        let x = random(10, 20, 4);
        let sel = IndexSet::from_vec(vec![5, 0, 13, 7]).unwrap();
        let r = residual(&x, &sel).unwrap();
        for i in sel.iter() {
            assert!(r.column(i).norm() <= 1e-8 * x.frobenius_norm());
        }
    }

    #[test]
    fn residual_flags_rank_deficiency() {
        let x = px(2, 3, &[1.0, 0.0, 2.0, 0.0, 0.0, 1.0]);
        let sel = IndexSet::from_vec(vec![0, 1]).unwrap();
        assert!(matches!(
            residual(&x, &sel),
            Err(Error::RankDeficient { index: 1 })
        ));
    }

    #[test]
    fn fast_path_hand_examples() {
        let x = px(2, 3, &[1.0, 0.0, 0.0, 1.0, 0.5, 0.5]);
        let (i, s) = greedy_select(x.data(), &x, f64::INFINITY).unwrap();
        assert_eq!(i, 0);
        assert!((s - 1.0).abs() < 1e-15);
        let r = residual(&x, &IndexSet::from_vec(vec![0]).unwrap()).unwrap();
        let (j, _) = greedy_select(&r, &x, f64::INFINITY).unwrap();
        assert_eq!(j, 1);
    }

    #[test]
    fn finite_q_matches_exhaustive_scan() {
        let x = random(5, 12, 5);
        let r = residual(&x, &IndexSet::from_vec(vec![3]).unwrap()).unwrap();
        let (i, s) = greedy_select(&r, &x, 2.0).unwrap();
        let mut best = (0, -1.0);
        for n in 0..12 {
            let v = r.transpose() * x.pixel(n);
            let score = v.norm();
            if score > best.1 {
                best = (n, score);
            }
        }
        assert_eq!(i, best.0);
        assert!((s - best.1).abs() < 1e-12 * best.1);
    }

    #[test]
    fn lq_norm_values() {
        let v = [3.0, -4.0];
        assert!((lq_norm(&v, 2.0) - 5.0).abs() < 1e-15);
        assert_eq!(lq_norm(&v, f64::INFINITY), 4.0);
        let expected = (3f64.powf(2.5) + 4f64.powf(2.5)).powf(0.4);
        assert!((lq_norm(&v, 2.5) - expected).abs() < 1e-12);
        assert_eq!(lq_norm(&[0.0, 0.0], 3.0), 0.0);
        assert!((lq_norm(&[1e200, 1e200], 2.0) - 1e200 * 2f64.sqrt()).abs() < 1e186);
    }

    #[test]
    fn zero_residual_is_rejected() {
        let x = random(2, 3, 6);
        let z = DMatrix::zeros(2, 3);
        assert!(greedy_select(&z, &x, 2.0).is_err());
    }

    #[test]
    fn noiseless_exact_recovery() {
        for seed in 0..20 {
            let inst = generate_synthetic(&SynthParams::noiseless(3, 60, 10, seed)).unwrap();
            let res = run_sd_somp(&inst.pixels, &SompConfig::default()).unwrap();
            assert_eq!(res.selected.len(), 3);
            assert_eq!(res.trace.stopped_by, StopReason::NoiselessResidual);
            let mut owners: Vec<usize> = res
                .selected
                .iter()
                .map(|n| inst.abundances.pure_endmember(n).expect("pure pick"))
                .collect();
            owners.sort_unstable();
            assert_eq!(owners, vec![0, 1, 2]);
        }
    }

    #[test]
    fn repeats_still_recover() {
        let mut p = SynthParams::noiseless(4, 80, 12, 9);
        p.pure_repeats = 3;
        let inst = generate_synthetic(&p).unwrap();
        for q in [2.0, 5.0, f64::INFINITY] {
            let res = run_sd_somp(&inst.pixels, &SompConfig::new(q, Stopping::NoiselessResidual, 0.0)).unwrap();
            let mut owners: Vec<usize> = res
                .selected
                .iter()
                .map(|n| inst.abundances.pure_endmember(n).unwrap())
                .collect();
            owners.sort_unstable();
            assert_eq!(owners, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn single_pixel() {
        let x = px(3, 1, &[1.0, 2.0, 3.0]);
        for stop in [Stopping::NoiselessResidual, Stopping::Rule1, Stopping::Rule2] {
            let res = run_sd_somp(&x, &SompConfig::new(f64::INFINITY, stop, 0.0)).unwrap();
            assert_eq!(res.selected.as_slice(), &[0]);
            assert_eq!(res.trace.records.len(), 1);
        }
    }

    #[test]
    fn rules_on_noiseless_data() {
        let inst = generate_synthetic(&SynthParams::noiseless(3, 40, 8, 4)).unwrap();
        let complete = inst.reference_set();
        let r1 = stopping_rule_1(&inst.pixels, &complete, 0.0, FclsOptions::default()).unwrap();
        assert!(r1.satisfied);
        let partial = IndexSet::from_vec(complete.as_slice()[..2].to_vec()).unwrap();
        let delta = 0.5 * inst.endmembers.sigma_min();
        let r1 = stopping_rule_1(&inst.pixels, &partial, delta, FclsOptions::default()).unwrap();
        assert!(!r1.satisfied);
        let r1 = stopping_rule_1(&inst.pixels, &partial, f64::INFINITY, FclsOptions::default()).unwrap();
        assert!(r1.satisfied);

        let missing = complete.as_slice()[2];
        let r2 = stopping_rule_2(&inst.pixels, &partial, missing, delta, FclsOptions::default()).unwrap();
        assert!(!r2.satisfied);
        assert!(r2.statistic >= inst.endmembers.sigma_min() - 1e-9);
        let any = (0..40).find(|n| !complete.contains(*n)).unwrap();
        let r2 = stopping_rule_2(&inst.pixels, &complete, any, 0.0, FclsOptions::default()).unwrap();
        assert!(r2.satisfied);
    }

    #[test]
    fn rules_agree_on_noiseless_runs() {
        for seed in 0..10 {
            let inst = generate_synthetic(&SynthParams::noiseless(4, 50, 10, seed)).unwrap();
            let a = run_sd_somp(&inst.pixels, &SompConfig::new(f64::INFINITY, Stopping::Rule1, 0.0)).unwrap();
            let b = run_sd_somp(&inst.pixels, &SompConfig::new(f64::INFINITY, Stopping::Rule2, 0.0)).unwrap();
            assert_eq!(a.selected, b.selected);
            assert_eq!(a.trace.stopped_by, StopReason::Rule1);
            assert_eq!(b.trace.stopped_by, StopReason::Rule2);
        }
    }

    #[test]
    fn huge_delta_still_selects_one() {
        let x = random(4, 10, 7);
        for stop in [Stopping::Rule1, Stopping::Rule2] {
            let res = run_sd_somp(&x, &SompConfig::new(2.0, stop, 1e6)).unwrap();
            assert_eq!(res.selected.len(), 1);
        }
    }

    #[test]
    fn caps_and_fixed_iterations() {
        let x = random(6, 20, 8);
        let mut cfg = SompConfig::new(f64::INFINITY, Stopping::FixedIterations(3), 0.0);
        let res = run_sd_somp(&x, &cfg).unwrap();
        assert_eq!(res.selected.len(), 3);
        assert_eq!(res.trace.stopped_by, StopReason::FixedIterations);
        cfg.max_endmembers = Some(2);
        let res = run_sd_somp(&x, &cfg).unwrap();
        assert_eq!(res.selected.len(), 2);
        assert_eq!(res.trace.stopped_by, StopReason::MaxEndmembers);
        let res = run_sd_somp(&x, &SompConfig::new(3.0, Stopping::Rule2, 0.0)).unwrap();
        assert_eq!(res.selected.len(), 6);
        assert_eq!(res.trace.stopped_by, StopReason::MaxEndmembers);
    }

    #[test]
    fn trace_invariants() {
        let x = random(8, 30, 9);
        let res = run_sd_somp(&x, &SompConfig::new(2.0, Stopping::FixedIterations(8), 0.0)).unwrap();
        let mut prev = x.frobenius_norm();
        for rec in &res.trace.records {
            assert!(rec.residual_frobenius <= prev + 1e-12);
            prev = rec.residual_frobenius;
        }
        let mut idx = res.selected.sorted();
        idx.dedup();
        assert_eq!(idx.len(), res.selected.len());
    }

    #[test]
    fn invalid_configs() {
        let x = random(3, 5, 10);
        for cfg in [
            SompConfig::new(1.0, Stopping::Rule1, 0.0),
            SompConfig::new(f64::NAN, Stopping::Rule1, 0.0),
            SompConfig::new(2.0, Stopping::Rule1, -1.0),
            SompConfig::new(2.0, Stopping::FixedIterations(0), 0.0),
        ] {
            assert!(run_sd_somp(&x, &cfg).is_err());
        }
        let zero = PixelMatrix::new(DMatrix::zeros(2, 2)).unwrap();
        assert!(run_sd_somp(&zero, &SompConfig::default()).is_err());
    }
}
