//! Noise estimation by regressing every band on all the others.
//!
//! With `W = (X X^T + λ I)^{-1}`, the ridge residual of band `i` regressed on
//! the remaining bands is row `i` of `W X` divided by `W_ii`, so all `M`
//! regressions share one symmetric eigendecomposition.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{dim, invalid, Result};
use crate::model::PixelMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseOptions {
    /// Quantile of the per-pixel noise norms reported as `ε̂`; 1 is the max.
    pub quantile: f64,
    /// Ridge weight relative to `trace(X X^T) / M`.
    pub relative_ridge: f64,
}

impl Default for NoiseOptions {
    fn default() -> Self {
        Self {
            quantile: 1.0,
            relative_ridge: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseEstimate {
    /// Estimated noise vectors, `M x L`.
    pub noise: DMatrix<f64>,
    /// `||v̂[n]||_2` for every pixel.
    pub column_norms: Vec<f64>,
    pub epsilon_hat: f64,
}

pub fn estimate_noise(pixels: &PixelMatrix) -> Result<NoiseEstimate> {
    estimate_noise_with(pixels, NoiseOptions::default())
}

pub fn estimate_noise_with(pixels: &PixelMatrix, options: NoiseOptions) -> Result<NoiseEstimate> {
    let (m, l) = (pixels.band_count(), pixels.pixel_count());
    if m < 2 {
        return Err(dim("noise estimation needs at least two bands"));
    }
    if l < m {
        return Err(dim(format!(
            "regression is underdetermined: {l} pixels for {m} bands"
        )));
    }
    if !(options.relative_ridge > 0.0) {
        return Err(invalid("ridge weight must be positive"));
    }
    let x = pixels.data();
    let gram = x * x.transpose();
    let trace = gram.trace();
    if trace == 0.0 {
        let noise = DMatrix::zeros(m, l);
        return finish(noise, options.quantile);
    }
    let lambda = options.relative_ridge * trace / m as f64;
    let eig = SymmetricEigen::new(gram);
    let v = &eig.eigenvectors;
    let inv: Vec<f64> = eig.eigenvalues.iter().map(|&mu| 1.0 / (mu.max(0.0) + lambda)).collect();

    // W = V diag(inv) V^T, applied as V diag(inv) (V^T X).
    let mut vtx = v.tr_mul(x);
    for (j, mut row) in vtx.row_iter_mut().enumerate() {
        row *= inv[j];
    }
    let mut noise = v * vtx;
    for i in 0..m {
        let w_ii: f64 = (0..m).map(|j| v[(i, j)] * v[(i, j)] * inv[j]).sum();
        let mut row = noise.row_mut(i);
        row /= w_ii;
    }
    finish(noise, options.quantile)
}

fn finish(noise: DMatrix<f64>, quantile: f64) -> Result<NoiseEstimate> {
    let column_norms: Vec<f64> = noise.column_iter().map(|c| c.norm()).collect();
    let epsilon_hat = quantile_of(&column_norms, quantile)?;
    Ok(NoiseEstimate {
        noise,
        column_norms,
        epsilon_hat,
    })
}

/// Nearest-rank `p`-quantile, `p ∈ (0, 1]`.
pub fn quantile_of(values: &[f64], p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid(format!("quantile must lie in (0, 1], got {p}")));
    }
    if values.is_empty() {
        return Err(invalid("quantile of an empty set"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[rank - 1])
}

/// `δ = multiplier * ε̂`.
pub fn delta_from_epsilon(epsilon_hat: f64, multiplier: f64) -> Result<f64> {
    if !(epsilon_hat >= 0.0) || !(multiplier >= 0.0) {
        return Err(invalid(format!(
            "epsilon ({epsilon_hat}) and multiplier ({multiplier}) must be >= 0"
        )));
    }
    Ok(multiplier * epsilon_hat)
}
