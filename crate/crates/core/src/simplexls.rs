//! Fully constrained least squares: `min ||x - B c||^2` over the unit simplex.
//!
//! Solved by monotone accelerated projected gradient (step `1/||B||_2^2`,
//! exact Euclidean projection onto the simplex) with an occasional
//! equality-constrained solve on the current support, which lands exactly on
//! the optimum once the support has been identified. Optimality is certified
//! by [`kkt_residual`].

use nalgebra::{DMatrix, DVector, DVectorView, SymmetricEigen};
use serde::Serialize;

use crate::error::{dim, invalid, Error, Result};
use crate::model::check_finite;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FclsOptions {
    /// Target KKT residual, scaled by `max(1, ||B||_2^2)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FclsOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimplexLsSolution {
    pub coefficients: DVector<f64>,
    /// `||x - B c||_2` at the returned coefficients.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SimplexLsSolution {
    pub fn objective(&self) -> f64 {
        self.residual_norm * self.residual_norm
    }
}

/// Solver bound to one dictionary; reusable across many targets.
#[derive(Debug, Clone)]
pub struct FclsSolver<'a> {
    dictionary: &'a DMatrix<f64>,
    gram: DMatrix<f64>,
    lipschitz: f64,
    options: FclsOptions,
}

impl<'a> FclsSolver<'a> {
    pub fn new(dictionary: &'a DMatrix<f64>, options: FclsOptions) -> Result<Self> {
        if dictionary.ncols() == 0 || dictionary.nrows() == 0 {
            return Err(dim("empty dictionary"));
        }
        if !(options.tol > 0.0) {
            return Err(invalid("tolerance must be positive"));
        }
        check_finite(dictionary)?;
        let gram = dictionary.tr_mul(dictionary);
        let lipschitz = SymmetricEigen::new(gram.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        Ok(Self {
            dictionary,
            gram,
            lipschitz,
            options,
        })
    }

    pub fn atom_count(&self) -> usize {
        self.dictionary.ncols()
    }

    pub fn solve(&self, target: DVectorView<'_, f64>) -> Result<SimplexLsSolution> {
        self.run(target, None)
    }

    /// Like [`solve`](Self::solve), also returning the objective after every
    /// iteration (starting with the initial point).
    pub fn solve_with_history(
        &self,
        target: DVectorView<'_, f64>,
    ) -> Result<(SimplexLsSolution, Vec<f64>)> {
        let mut history = Vec::new();
        let sol = self.run(target, Some(&mut history))?;
        Ok((sol, history))
    }

    fn objective(&self, target: &DVectorView<'_, f64>, c: &DVector<f64>) -> f64 {
        (target - self.dictionary * c).norm_squared()
    }

    fn run(
        &self,
        target: DVectorView<'_, f64>,
        mut history: Option<&mut Vec<f64>>,
    ) -> Result<SimplexLsSolution> {
        if target.len() != self.dictionary.nrows() {
            return Err(dim(format!(
                "target has {} entries, dictionary has {} rows",
                target.len(),
                self.dictionary.nrows()
            )));
        }
        if let Some(row) = target.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row, col: 0 });
        }
        let k = self.atom_count();
        let b = self.dictionary.tr_mul(&target);

        // Start at the best vertex.
        let start = (0..k)
            .min_by(|&i, &j| {
                let fi = self.gram[(i, i)] - 2.0 * b[i];
                let fj = self.gram[(j, j)] - 2.0 * b[j];
                fi.total_cmp(&fj)
            })
            .unwrap_or(0);
        let mut c = DVector::zeros(k);
        c[start] = 1.0;
        let mut fc = self.objective(&target, &c);
        if let Some(h) = history.as_deref_mut() {
            h.push(fc);
        }
        let tol = self.options.tol * self.lipschitz.max(1.0);
        if k == 1 || self.lipschitz == 0.0 {
            return Ok(self.finish(&target, c, 0, true));
        }

        let step = 1.0 / self.lipschitz;
        let mut y = c.clone();
        let mut t = 1.0f64;
        for it in 1..=self.options.max_iter {
            if kkt_from_gradient(&c, &(&self.gram * &c - &b)) <= tol {
                return Ok(self.finish(&target, c, it - 1, true));
            }

            let grad = &self.gram * &y - &b;
            let mut z = &y - grad * step;
            project_onto_simplex(z.as_mut_slice());
            let fz = self.objective(&target, &z);

            let previous = c.clone();
            let improved = fz <= fc;
            if improved {
                c.copy_from(&z);
                fc = fz;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            if improved {
                y = &c + (&z - &c) * (t / t_next) + (&c - &previous) * ((t - 1.0) / t_next);
                t = t_next;
            } else {
                // Momentum overshot: restart from the incumbent.
                y.copy_from(&c);
                t = 1.0;
            }

            if it % 8 == 0 {
                if let Some(p) = self.polish(&c, &b) {
                    let fp = self.objective(&target, &p);
                    if fp <= fc {
                        c = p;
                        fc = fp;
                        y.copy_from(&c);
                        t = 1.0;
                    }
                }
            }
            if let Some(h) = history.as_deref_mut() {
                h.push(fc);
            }
        }
        let converged = kkt_from_gradient(&c, &(&self.gram * &c - &b)) <= tol;
        Ok(self.finish(&target, c, self.options.max_iter, converged))
    }

    /// Least squares restricted to the support of `c` with the sum-to-one
    /// constraint; `None` if the system is singular or the result leaves the
    /// simplex.
    fn polish(&self, c: &DVector<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
        let support: Vec<usize> = (0..c.len()).filter(|&i| c[i] > 0.0).collect();
        let s = support.len();
        if s == 0 {
            return None;
        }
        let mut kkt = DMatrix::zeros(s + 1, s + 1);
        let mut rhs = DVector::zeros(s + 1);
        for (a, &i) in support.iter().enumerate() {
            for (bb, &j) in support.iter().enumerate() {
                kkt[(a, bb)] = self.gram[(i, j)];
            }
            kkt[(a, s)] = 1.0;
            kkt[(s, a)] = 1.0;
            rhs[a] = b[i];
        }
        rhs[s] = 1.0;
        let sol = kkt.lu().solve(&rhs)?;
        let mut out = DVector::zeros(c.len());
        for (a, &i) in support.iter().enumerate() {
            let v = sol[a];
            if !v.is_finite() || v < 0.0 {
                return None;
            }
            out[i] = v;
        }
        let total = out.sum();
        if (total - 1.0).abs() > 1e-12 {
            return None;
        }
        out /= total;
        Some(out)
    }

    fn finish(
        &self,
        target: &DVectorView<'_, f64>,
        coefficients: DVector<f64>,
        iterations: usize,
        converged: bool,
    ) -> SimplexLsSolution {
        let residual_norm = (target - self.dictionary * &coefficients).norm();
        SimplexLsSolution {
            coefficients,
            residual_norm,
            iterations,
            converged,
        }
    }
}

/// One-shot FCLS solve.
pub fn solve_simplex_ls(
    target: DVectorView<'_, f64>,
    dictionary: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<SimplexLsSolution> {
    FclsSolver::new(dictionary, FclsOptions { tol, max_iter })?.solve(target)
}

/// Optimality certificate for a simplex-feasible `c`: with
/// `g = B^T (B c - x)` and `mu = min_i g_i`, returns `max_i c_i (g_i - mu)`,
/// which vanishes exactly at the minimizers.
pub fn kkt_residual(
    coefficients: &DVector<f64>,
    target: DVectorView<'_, f64>,
    dictionary: &DMatrix<f64>,
) -> f64 {
    let g = dictionary.tr_mul(&(dictionary * coefficients - target));
    kkt_from_gradient(coefficients, &g)
}

fn kkt_from_gradient(c: &DVector<f64>, g: &DVector<f64>) -> f64 {
    let mu = g.min();
    c.iter()
        .zip(g.iter())
        .map(|(ci, gi)| ci * (gi - mu))
        .fold(0.0, f64::max)
}

/// Euclidean projection onto `{c >= 0, sum c = 1}`, in place (sort-based).
pub fn project_onto_simplex(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force objective over a grid on the simplex (k <= 3).
    pub(crate) fn grid_min(target: &DVector<f64>, dict: &DMatrix<f64>, step: f64) -> f64 {
        let k = dict.ncols();
        let n = (1.0 / step).round() as usize;
        let eval = |c: &[f64]| (target - dict * DVector::from_column_slice(c)).norm_squared();
        let mut best = f64::INFINITY;
        match k {
            1 => best = eval(&[1.0]),
            2 => {
                for i in 0..=n {
                    let a = i as f64 / n as f64;
                    best = best.min(eval(&[a, 1.0 - a]));
                }
            }
            3 => {
                for i in 0..=n {
                    for j in 0..=(n - i) {
                        let a = i as f64 / n as f64;
                        let b = j as f64 / n as f64;
                        best = best.min(eval(&[a, b, (1.0 - a - b).max(0.0)]));
                    }
                }
            }
            _ => unreachable!(),
        }
        best
    }

    #[test]
    fn exact_vertex() {
        let dict = DMatrix::from_column_slice(3, 3, &[1.0, 0.0, 2.0, 0.5, 1.0, 0.0, 0.0, 0.3, 1.0]);
        let target = dict.column(1).clone_owned();
        let sol = solve_simplex_ls(target.as_view(), &dict, 1e-9, 10_000).unwrap();
        assert!((sol.coefficients.clone() - DVector::from_column_slice(&[0.0, 1.0, 0.0])).amax() < 1e-9);
        assert!(sol.residual_norm < 1e-9);
        assert!(sol.converged);
    }

    #[test]
    fn interior_midpoint() {
        let dict = DMatrix::from_column_slice(3, 2, &[2.0, 0.0, 0.0, 0.0, 3.0, 0.0]);
        let target = (dict.column(0) + dict.column(1)) * 0.5;
        let sol = solve_simplex_ls(target.as_view(), &dict, 1e-9, 10_000).unwrap();
        assert!((sol.coefficients[0] - 0.5).abs() < 1e-9);
        assert!((sol.coefficients[1] - 0.5).abs() < 1e-9);
        assert!(sol.residual_norm < 1e-9);
    }

    #[test]
    fn outside_hull_matches_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dict = DMatrix::from_fn(3, 2, |_, _| rng.random_range(-1.0..1.0));
        let target = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
        let sol = solve_simplex_ls(target.as_view(), &dict, 1e-9, 10_000).unwrap();
        let grid = grid_min(&target, &dict, 1e-4);
        assert!(sol.objective() <= grid + 1e-12);
        assert!((sol.objective() - grid).abs() < 1e-6);
    }

    #[test]
    fn kkt_zero_at_exact_solution_and_positive_elsewhere() {
        let dict = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let target = DVector::from_column_slice(&[0.0, 1.0]);
        let opt = DVector::from_column_slice(&[0.0, 1.0]);
        assert!(kkt_residual(&opt, target.as_view(), &dict) < 1e-10);
        let wrong = DVector::from_column_slice(&[1.0, 0.0]);
        assert!(kkt_residual(&wrong, target.as_view(), &dict) > 0.0);
    }

    #[test]
    fn random_instances_certify() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let m = rng.random_range(2..8);
            let k = rng.random_range(1..6);
            let dict = DMatrix::from_fn(m, k, |_, _| rng.random_range(-1.0..1.0));
            let target = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
            let sol = solve_simplex_ls(target.as_view(), &dict, 1e-10, 10_000).unwrap();
            assert!(sol.converged);
            assert!(kkt_residual(&sol.coefficients, target.as_view(), &dict) <= 1e-6);
            assert!((sol.coefficients.sum() - 1.0).abs() < 1e-10);
            assert!(sol.coefficients.iter().all(|&c| c >= 0.0));
            let direct = (&target - &dict * &sol.coefficients).norm_squared();
            assert!((direct - sol.objective()).abs() < 1e-10);
        }
    }

    #[test]
    fn objective_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let dict = DMatrix::from_fn(6, 4, |_, _| rng.random_range(0.0..1.0));
            let target = DVector::from_fn(6, |_, _| rng.random_range(-1.0..2.0));
            let solver = FclsSolver::new(&dict, FclsOptions::default()).unwrap();
            let (_, history) = solver.solve_with_history(target.as_view()).unwrap();
            for w in history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }

    #[test]
    fn duplicate_columns_are_accepted() {
        let a = [1.0, 2.0, 0.0];
        let b = [0.0, 1.0, 1.0];
        let dict = DMatrix::from_columns(&[
            DVector::from_column_slice(&a),
            DVector::from_column_slice(&a),
            DVector::from_column_slice(&b),
        ]);
        let target = DVector::from_column_slice(&[0.5, 1.5, 0.5]);
        let sol = solve_simplex_ls(target.as_view(), &dict, 1e-9, 10_000).unwrap();
        assert!(sol.residual_norm < 1e-8);
        assert!((sol.coefficients[0] + sol.coefficients[1] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn max_iter_reports_non_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let dict = DMatrix::from_fn(10, 6, |_, _| rng.random_range(0.0..1.0));
        let target = DVector::from_fn(10, |_, _| rng.random_range(0.0..1.0));
        let sol = solve_simplex_ls(target.as_view(), &dict, 1e-15, 1).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!((sol.coefficients.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let empty = DMatrix::<f64>::zeros(3, 0);
        let t = DVector::from_element(3, 1.0);
        assert!(solve_simplex_ls(t.as_view(), &empty, 1e-9, 10).is_err());
        let dict = DMatrix::from_element(3, 2, 1.0);
        let bad = DVector::from_column_slice(&[1.0, f64::NAN, 0.0]);
        assert!(solve_simplex_ls(bad.as_view(), &dict, 1e-9, 10).is_err());
        assert!(solve_simplex_ls(t.as_view(), &dict, 0.0, 10).is_err());
        let short = DVector::from_element(2, 1.0);
        assert!(solve_simplex_ls(short.as_view(), &dict, 1e-9, 10).is_err());
    }

    #[test]
    fn projection_basics() {
        let mut v = [0.2, 0.3, 0.5];
        project_onto_simplex(&mut v);
        assert_eq!(v, [0.2, 0.3, 0.5]);
        let mut w = [2.0, 0.0, -1.0];
        project_onto_simplex(&mut w);
        assert_eq!(w, [1.0, 0.0, 0.0]);
        let mut u = [1.0, 1.0];
        project_onto_simplex(&mut u);
        assert_eq!(u, [0.5, 0.5]);
    }
}
