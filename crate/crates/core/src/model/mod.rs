//! Data types for the linear mixing model, synthetic scene generation,
//! affine-set dimension reduction and matrix file I/O.
//!
//! Matrices follow the usual hyperspectral layout: one row per spectral band,
//! one column per pixel. Pixel indices are zero-based throughout the crate.

mod affine;
mod io;
mod synth;

pub use affine::{fit_affine_set, AffineFit};
pub use io::{load_matrix, save_matrix, MatrixFormat};
pub use synth::{
    generate_synthetic, nearest_pure_indices, snr_to_sigma, synthetic_library, EndmemberSource,
    SynthParams,
};

use nalgebra::{DMatrix, DVector, DVectorView};
use serde::{Deserialize, Serialize};

use crate::error::{dim, invalid, Error, Result};

/// Tolerance used when validating that abundance columns lie on the unit simplex.
pub const SIMPLEX_TOL: f64 = 1e-10;

/// Measured data `X`: `M` spectral bands by `L` pixels. Doubles as the
/// self-dictionary for the sparse regression.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelMatrix {
    data: DMatrix<f64>,
}

impl PixelMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(dim(format!(
                "pixel matrix must be non-empty, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        check_finite(&data)?;
        Ok(Self { data })
    }

    /// Number of spectral bands `M`.
    pub fn band_count(&self) -> usize {
        self.data.nrows()
    }

    /// Number of pixels `L`.
    pub fn pixel_count(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }

    pub fn pixel(&self, n: usize) -> DVectorView<'_, f64> {
        self.data.column(n)
    }

    /// Columns listed in `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> DMatrix<f64> {
        self.data.select_columns(indices)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.data * c)
    }

    /// New matrix whose column `j` is column `perm[j]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.pixel_count() {
            return Err(dim("permutation length must equal pixel count"));
        }
        Self::new(self.data.select_columns(perm))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.norm()
    }
}

/// Endmember signatures `A` (`M x N`), columns linearly independent.
#[derive(Debug, Clone, PartialEq)]
pub struct EndmemberMatrix {
    data: DMatrix<f64>,
}

impl EndmemberMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.ncols() == 0 || data.nrows() == 0 {
            return Err(dim("endmember matrix must be non-empty"));
        }
        if data.ncols() > data.nrows() {
            return Err(dim(format!(
                "{} endmembers cannot be linearly independent in {} bands",
                data.ncols(),
                data.nrows()
            )));
        }
        check_finite(&data)?;
        let sv = data.singular_values();
        let smax = sv.max();
        let smin = sv.min();
        if !(smin > 1e-12 * smax.max(f64::MIN_POSITIVE)) {
            return Err(Error::Degenerate(
                "endmember columns are linearly dependent".into(),
            ));
        }
        Ok(Self { data })
    }

    pub fn endmember_count(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn sigma_min(&self) -> f64 {
        self.data.singular_values().min()
    }
}

/// Abundances `S` (`N x L`); every column lies on the unit simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceMatrix {
    data: DMatrix<f64>,
}

impl AbundanceMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        check_finite(&data)?;
        for (n, col) in data.column_iter().enumerate() {
            let sum: f64 = col.iter().sum();
            if col.iter().any(|&v| v < -SIMPLEX_TOL) || (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(invalid(format!(
                    "abundance column {n} is not on the unit simplex (sum {sum})"
                )));
            }
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn endmember_count(&self) -> usize {
        self.data.nrows()
    }

    pub fn pixel_count(&self) -> usize {
        self.data.ncols()
    }

    /// Endmember `k` if column `n` is exactly the unit vector `e_k`.
    pub fn pure_endmember(&self, n: usize) -> Option<usize> {
        let col = self.data.column(n);
        let k = col.imax();
        let pure = col
            .iter()
            .enumerate()
            .all(|(i, &v)| if i == k { v == 1.0 } else { v == 0.0 });
        pure.then_some(k)
    }
}

/// Ordered set of distinct pixel indices; order records selection sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct IndexSet {
    indices: Vec<usize>,
}

impl IndexSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_vec(indices: Vec<usize>) -> Result<Self> {
        let mut set = Self::new();
        for i in indices {
            set.push(i)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, index: usize) -> Result<()> {
        if self.indices.contains(&index) {
            return Err(invalid(format!("index {index} is already in the set")));
        }
        self.indices.push(index);
        Ok(())
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.contains(&index)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn sorted(&self) -> Vec<usize> {
        let mut v = self.indices.clone();
        v.sort_unstable();
        v
    }

    /// Membership equality, ignoring order.
    pub fn same_members(&self, other: &IndexSet) -> bool {
        self.sorted() == other.sorted()
    }
}

impl TryFrom<Vec<usize>> for IndexSet {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::from_vec(v)
    }
}

impl From<IndexSet> for Vec<usize> {
    fn from(s: IndexSet) -> Self {
        s.indices
    }
}

/// Ground-truth bundle for a synthetic (or fully annotated) scene.
#[derive(Debug, Clone)]
pub struct MixingInstance {
    pub pixels: PixelMatrix,
    pub endmembers: EndmemberMatrix,
    pub abundances: AbundanceMatrix,
    pub noise: DMatrix<f64>,
    /// Planted pure (or purity-level) pixels, grouped by endmember.
    pub pure_pixel_set: IndexSet,
    /// Endmember owning each entry of `pure_pixel_set`.
    pub pure_pixel_owner: Vec<usize>,
    /// `max_n ||v[n]||_2`.
    pub noise_bound_true: f64,
    /// Target SNR in dB; `f64::INFINITY` for noiseless scenes.
    pub snr_db: f64,
    pub purity: f64,
}

impl MixingInstance {
    /// Assemble an instance from measured pixels and ground truth. The noise
    /// is recovered as `X - A S`; owners of `pure_pixel_set` entries are
    /// their dominant abundance component.
    pub fn from_parts(
        pixels: PixelMatrix,
        endmembers: EndmemberMatrix,
        abundances: AbundanceMatrix,
        pure_pixel_set: IndexSet,
        snr_db: f64,
    ) -> Result<Self> {
        let (m, l) = (pixels.band_count(), pixels.pixel_count());
        if endmembers.data().nrows() != m {
            return Err(dim("endmember band count differs from pixel band count"));
        }
        if abundances.endmember_count() != endmembers.endmember_count()
            || abundances.pixel_count() != l
        {
            return Err(dim("abundance matrix shape does not match N x L"));
        }
        if let Some(bad) = pure_pixel_set.iter().find(|&n| n >= l) {
            return Err(invalid(format!("pure pixel index {bad} out of range")));
        }
        let noise = pixels.data() - endmembers.data() * abundances.data();
        let noise_bound_true = max_column_norm(&noise);
        let pure_pixel_owner = pure_pixel_set
            .iter()
            .map(|n| abundances.data().column(n).imax())
            .collect();
        let purity = (0..abundances.endmember_count())
            .map(|k| abundances.data().row(k).max())
            .fold(f64::INFINITY, f64::min);
        Ok(Self {
            pixels,
            endmembers,
            abundances,
            noise,
            pure_pixel_set,
            pure_pixel_owner,
            noise_bound_true,
            snr_db,
            purity,
        })
    }

    pub fn endmember_count(&self) -> usize {
        self.endmembers.endmember_count()
    }

    /// Noiseless pixel `A s[n]`.
    pub fn clean_pixel(&self, n: usize) -> DVector<f64> {
        self.endmembers.data() * self.abundances.data().column(n)
    }

    /// The first planted pixel of every endmember, ordered by endmember.
    pub fn reference_set(&self) -> IndexSet {
        let n = self.endmember_count();
        let mut out = vec![None; n];
        for (idx, &owner) in self.pure_pixel_set.iter().zip(&self.pure_pixel_owner) {
            if out[owner].is_none() {
                out[owner] = Some(idx);
            }
        }
        IndexSet::from_vec(out.into_iter().flatten().collect())
            .expect("planted pixel indices are distinct")
    }
}

pub(crate) fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    for (col, c) in m.column_iter().enumerate() {
        if let Some(row) = c.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
    }
    Ok(())
}

pub(crate) fn max_column_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_set_rejects_duplicates() {
        let mut s = IndexSet::from_vec(vec![3, 1]).unwrap();
        assert!(s.push(3).is_err());
        s.push(0).unwrap();
        assert_eq!(s.as_slice(), &[3, 1, 0]);
        assert_eq!(s.sorted(), vec![0, 1, 3]);
        assert!(IndexSet::from_vec(vec![2, 2]).is_err());
    }

    #[test]
    fn pixel_matrix_rejects_non_finite_and_empty() {
        let mut d = DMatrix::from_element(2, 2, 1.0);
        d[(1, 0)] = f64::NAN;
        assert!(matches!(
            PixelMatrix::new(d),
            Err(Error::NonFinite { row: 1, col: 0 })
        ));
        assert!(PixelMatrix::new(DMatrix::zeros(0, 3)).is_err());
    }

    #[test]
    fn endmembers_must_be_independent() {
        let a = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert!(EndmemberMatrix::new(a).is_err());
        let wide = DMatrix::from_element(2, 3, 1.0);
        assert!(EndmemberMatrix::new(wide).is_err());
        let id = EndmemberMatrix::new(DMatrix::identity(3, 3)).unwrap();
        assert!((id.sigma_min() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn abundance_validation() {
        let ok = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.3, 0.7]);
        let s = AbundanceMatrix::new(ok).unwrap();
        assert_eq!(s.pure_endmember(0), Some(0));
        assert_eq!(s.pure_endmember(1), None);
        let bad = DMatrix::from_column_slice(2, 1, &[0.5, 0.6]);
        assert!(AbundanceMatrix::new(bad).is_err());
        let neg = DMatrix::from_column_slice(2, 1, &[1.5, -0.5]);
        assert!(AbundanceMatrix::new(neg).is_err());
    }
}
