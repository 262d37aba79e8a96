//! Fixtures shared by the criterion benchmarks.

use nalgebra::{DMatrix, DVector};
use sdsomp_core::model::{generate_synthetic, EndmemberSource};
use sdsomp_core::{MixingInstance, SynthParams};

/// Random-endmember scene with one pure pixel per endmember.
pub fn scene(n: usize, l: usize, m: usize, snr_db: f64, seed: u64) -> MixingInstance {
    generate_synthetic(&SynthParams {
        n_endmembers: n,
        n_pixels: l,
        source: EndmemberSource::Random { bands: m },
        snr_db,
        purity: 1.0,
        pure_repeats: 1,
        seed,
    })
    .expect("valid benchmark scene")
}

/// Dictionary and target for a simplex least-squares solve, with the target
/// outside the hull.
pub fn fcls_problem(m: usize, k: usize) -> (DMatrix<f64>, DVector<f64>) {
    let b = DMatrix::from_fn(m, k, |i, j| ((i * 7 + j * 13) % 17) as f64 / 17.0 + 0.05 * j as f64);
    let x = DVector::from_fn(m, |i, _| ((i * 5) % 11) as f64 / 11.0 - 0.2);
    (b, x)
}
