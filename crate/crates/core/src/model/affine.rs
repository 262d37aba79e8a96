use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::PixelMatrix;
use crate::error::{dim, invalid, Result};

/// Least-squares affine set `{mean + basis * y}` fitted to a set of pixels.
#[derive(Debug, Clone)]
pub struct AffineFit {
    pub mean: DVector<f64>,
    /// `M x r`, orthonormal columns.
    pub basis: DMatrix<f64>,
    pub dim: usize,
    /// All eigenvalues of the mean-removed scatter matrix, descending.
    pub scatter_spectrum: Vec<f64>,
}

/// Fit an `r`-dimensional affine set: the pixel mean plus the top-`r`
/// eigenvectors of the mean-removed scatter matrix.
pub fn fit_affine_set(pixels: &PixelMatrix, r: usize) -> Result<AffineFit> {
    let (m, l) = (pixels.band_count(), pixels.pixel_count());
    // With L pixels the affine hull has dimension at most L - 1, but a full
    // M-dimensional fit is always well defined.
    if r == 0 || r > m || (r > l.saturating_sub(1) && r != m) {
        return Err(invalid(format!(
            "affine dimension {r} outside [1, min(M, L-1)] for M={m}, L={l}"
        )));
    }
    let x = pixels.data();
    let mean = x.column_mean();
    let mut centered = x.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let scatter = &centered * centered.transpose();
    let eig = SymmetricEigen::new(scatter);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let basis = eig.eigenvectors.select_columns(&order[..r]);
    let scatter_spectrum = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    Ok(AffineFit {
        mean,
        basis,
        dim: r,
        scatter_spectrum,
    })
}

impl AffineFit {
    pub fn band_count(&self) -> usize {
        self.mean.len()
    }

    /// Reduced coordinates `basis^T (x[n] - mean)`, an `r x L` matrix.
    pub fn project(&self, pixels: &PixelMatrix) -> Result<PixelMatrix> {
        if pixels.band_count() != self.band_count() {
            return Err(dim(format!(
                "fit has {} bands, pixels have {}",
                self.band_count(),
                pixels.band_count()
            )));
        }
        let mut centered = pixels.data().clone();
        for mut col in centered.column_iter_mut() {
            col -= &self.mean;
        }
        PixelMatrix::new(self.basis.tr_mul(&centered))
    }

    /// Map reduced coordinates back to band space: `mean + basis * y`.
    pub fn embed(&self, reduced: &PixelMatrix) -> Result<PixelMatrix> {
        if reduced.band_count() != self.dim {
            return Err(dim(format!(
                "expected {} reduced coordinates, got {}",
                self.dim,
                reduced.band_count()
            )));
        }
        let mut out = &self.basis * reduced.data();
        for mut col in out.column_iter_mut() {
            col += &self.mean;
        }
        PixelMatrix::new(out)
    }

    /// Orthogonal projection of every pixel onto the fitted affine set,
    /// expressed in band space.
    pub fn reconstruct(&self, pixels: &PixelMatrix) -> Result<PixelMatrix> {
        self.embed(&self.project(pixels)?)
    }

    /// `sum_n ||x[n] - reconstruct(x[n])||^2`.
    pub fn reconstruction_error(&self, pixels: &PixelMatrix) -> Result<f64> {
        let rec = self.reconstruct(pixels)?;
        Ok((pixels.data() - rec.data()).norm_squared())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(m: usize, l: usize, seed: u64) -> PixelMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PixelMatrix::new(DMatrix::from_fn(m, l, |_, _| rng.random_range(-1.0..1.0))).unwrap()
    }

    #[test]
    fn exact_affine_data_has_zero_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let offset = DVector::from_fn(6, |_, _| rng.random::<f64>());
        let dirs = DMatrix::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0));
        let coords = DMatrix::from_fn(2, 30, |_, _| rng.random_range(-1.0..1.0));
        let mut x = &dirs * coords;
        for mut c in x.column_iter_mut() {
            c += &offset;
        }
        let px = PixelMatrix::new(x).unwrap();
        let fit = fit_affine_set(&px, 2).unwrap();
        assert!(fit.reconstruction_error(&px).unwrap() < 1e-20);
    }

    #[test]
    fn full_dimension_has_zero_error() {
        let px = random(4, 3, 2);
        let fit = fit_affine_set(&px, 4).unwrap();
        assert!(fit.reconstruction_error(&px).unwrap() < 1e-20);
    }

    #[test]
    fn basis_is_orthonormal() {
        let fit = fit_affine_set(&random(8, 40, 3), 5).unwrap();
        let gram = fit.basis.tr_mul(&fit.basis);
        assert!((gram - DMatrix::identity(5, 5)).amax() < 1e-10);
    }

    #[test]
    fn residual_equals_trailing_eigenvalues() {
        // Oracle: singular values of the centered data square to the scatter
        // eigenvalues; the discarded energy is the sum of the trailing ones.
        let px = random(5, 20, 4);
        let fit = fit_affine_set(&px, 2).unwrap();
        let mut centered = px.data().clone();
        let mean = px.data().column_mean();
        for mut c in centered.column_iter_mut() {
            c -= &mean;
        }
        let mut sv: Vec<f64> = centered.singular_values().iter().map(|s| s * s).collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        let tail: f64 = sv[2..].iter().sum();
        let err = fit.reconstruction_error(&px).unwrap();
        assert!((err - tail).abs() < 1e-10 * tail.max(1.0), "{err} vs {tail}");
    }

    #[test]
    fn error_decreases_with_dimension() {
        let px = random(7, 30, 5);
        let errs: Vec<f64> = (1..=7)
            .map(|r| fit_affine_set(&px, r).unwrap().reconstruction_error(&px).unwrap())
            .collect();
        for w in errs.windows(2) {
            assert!(w[0] >= w[1] - 1e-12);
        }
    }

    #[test]
    fn project_and_embed() {
        let px = random(6, 25, 6);
        let fit = fit_affine_set(&px, 3).unwrap();
        let at_mean =
            PixelMatrix::new(DMatrix::from_fn(6, 4, |i, _| fit.mean[i])).unwrap();
        assert!(fit.project(&at_mean).unwrap().data().amax() < 1e-12);

        let y = random(3, 9, 7);
        let x = fit.embed(&y).unwrap();
        let back = fit.project(&x).unwrap();
        assert!((back.data() - y.data()).amax() < 1e-12);

        // Embedding the projection equals the explicit projector formula.
        let rec = fit.reconstruct(&px).unwrap();
        let proj = &fit.basis * fit.basis.transpose();
        for n in 0..25 {
            let centered = px.pixel(n) - &fit.mean;
            let expected = &fit.mean + &proj * centered;
            assert!((rec.pixel(n) - expected).amax() < 1e-12);
        }
    }

    #[test]
    fn range_and_dimension_errors() {
        let px = random(5, 4, 8);
        assert!(fit_affine_set(&px, 0).is_err());
        assert!(fit_affine_set(&px, 6).is_err());
        assert!(fit_affine_set(&px, 4).is_err());
        let fit = fit_affine_set(&px, 3).unwrap();
        assert!(fit.project(&random(4, 4, 9)).is_err());
        assert!(fit.embed(&random(2, 4, 9)).is_err());
    }
}
