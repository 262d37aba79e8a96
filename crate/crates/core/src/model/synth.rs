use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use super::{
    max_column_norm, AbundanceMatrix, EndmemberMatrix, IndexSet, MixingInstance, PixelMatrix,
};
use crate::error::{dim, invalid, Error, Result};

/// Where the endmember signatures of a synthetic scene come from.
#[derive(Debug, Clone)]
pub enum EndmemberSource {
    /// Entries drawn i.i.d. uniform on `[0, 1)`.
    Random { bands: usize },
    /// `N` distinct columns drawn uniformly from a spectral library.
    Library(PixelMatrix),
}

impl EndmemberSource {
    fn band_count(&self) -> usize {
        match self {
            EndmemberSource::Random { bands } => *bands,
            EndmemberSource::Library(lib) => lib.band_count(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthParams {
    pub n_endmembers: usize,
    pub n_pixels: usize,
    pub source: EndmemberSource,
    /// `f64::INFINITY` for a noiseless scene.
    pub snr_db: f64,
    /// Pure pixel level in `(1/N, 1]`.
    pub purity: f64,
    pub pure_repeats: usize,
    pub seed: u64,
}

impl SynthParams {
    /// Noiseless scene with one exact pure pixel per endmember.
    pub fn noiseless(n_endmembers: usize, n_pixels: usize, bands: usize, seed: u64) -> Self {
        Self {
            n_endmembers,
            n_pixels,
            source: EndmemberSource::Random { bands },
            snr_db: f64::INFINITY,
            purity: 1.0,
            pure_repeats: 1,
            seed,
        }
    }
}

/// Noise standard deviation that yields `snr_db` for the given noiseless
/// signal, with SNR measured as `sum_n ||A s[n]||^2 / (M L sigma^2)`.
pub fn snr_to_sigma(signal: &DMatrix<f64>, snr_db: f64) -> Result<f64> {
    if !snr_db.is_finite() {
        return Err(invalid("SNR must be finite to define a noise level"));
    }
    let energy = signal.norm_squared();
    if !(energy > 0.0) {
        return Err(Error::Degenerate("signal is identically zero".into()));
    }
    let count = (signal.nrows() * signal.ncols()) as f64;
    Ok((energy / (count * 10f64.powf(snr_db / 10.0))).sqrt())
}

/// Draw a synthetic scene under the linear mixing model.
///
/// Non-planted abundances are uniform Dirichlet draws. With `purity == 1`
/// every endmember gets `pure_repeats` exact pure pixels at random positions.
/// With `purity < 1` draws whose largest component exceeds the purity are
/// pulled toward the simplex barycenter until it equals the purity, and each
/// endmember gets `pure_repeats` planted pixels `rho e_k + (1 - rho) u`, so
/// the pure pixel level of every endmember is exactly `rho`.
pub fn generate_synthetic(params: &SynthParams) -> Result<MixingInstance> {
    let n = params.n_endmembers;
    let l = params.n_pixels;
    let m = params.source.band_count();
    let rho = params.purity;
    let repeats = params.pure_repeats;

    if n == 0 || l == 0 || m == 0 {
        return Err(dim("N, L and M must all be positive"));
    }
    if repeats == 0 {
        return Err(invalid("pure_repeats must be at least 1"));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(invalid(format!("purity {rho} outside (0, 1]")));
    }
    if rho < 1.0 && (n == 1 || rho <= 1.0 / n as f64) {
        return Err(invalid(format!(
            "purity {rho} is unattainable with {n} endmembers (needs rho > 1/N)"
        )));
    }
    let planted = n * repeats;
    if planted > l || n > m || n > l - planted {
        return Err(dim(format!(
            "need N <= min(M, L - N*repeats); got N={n}, M={m}, L={l}, repeats={repeats}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let a = match &params.source {
        EndmemberSource::Random { bands } => {
            DMatrix::from_fn(*bands, n, |_, _| rng.random::<f64>())
        }
        EndmemberSource::Library(lib) => {
            if n > lib.pixel_count() {
                return Err(invalid(format!(
                    "library holds {} spectra, {n} requested",
                    lib.pixel_count()
                )));
            }
            let mut cols = sample(&mut rng, lib.pixel_count(), n).into_vec();
            cols.sort_unstable();
            lib.select(&cols)
        }
    };
    let endmembers = EndmemberMatrix::new(a)?;

    let positions = sample(&mut rng, l, planted).into_vec();
    let mut owner_of = vec![None; l];
    for (slot, &pos) in positions.iter().enumerate() {
        owner_of[pos] = Some(slot / repeats);
    }

    let mut s = DMatrix::zeros(n, l);
    for (col, owner) in owner_of.iter().enumerate() {
        let abundance = match owner {
            Some(k) => planted_abundance(&mut rng, n, *k, rho),
            None => {
                let mut d = dirichlet(&mut rng, n);
                if rho < 1.0 {
                    cap_purity(&mut d, rho);
                }
                d
            }
        };
        s.set_column(col, &abundance);
    }
    let abundances = AbundanceMatrix::new(s)?;

    let clean = endmembers.data() * abundances.data();
    let noise = if params.snr_db.is_finite() {
        let sigma = snr_to_sigma(&clean, params.snr_db)?;
        DMatrix::from_fn(m, l, |_, _| sigma * rng.sample::<f64, _>(StandardNormal))
    } else if params.snr_db == f64::INFINITY {
        DMatrix::zeros(m, l)
    } else {
        return Err(invalid(format!("invalid SNR {}", params.snr_db)));
    };
    let pixels = PixelMatrix::new(&clean + &noise)?;

    Ok(MixingInstance {
        pixels,
        endmembers,
        abundances,
        noise_bound_true: max_column_norm(&noise),
        noise,
        pure_pixel_set: IndexSet::from_vec(positions)?,
        pure_pixel_owner: (0..planted).map(|slot| slot / repeats).collect(),
        snr_db: params.snr_db,
        purity: rho,
    })
}

fn dirichlet(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    let mut d = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(Exp1));
    let total = d.sum();
    d /= total;
    d
}

/// Pull `s` toward the barycenter so its largest component equals `rho`.
fn cap_purity(s: &mut DVector<f64>, rho: f64) {
    let n = s.len() as f64;
    let peak = s.max();
    if peak <= rho {
        return;
    }
    let center = 1.0 / n;
    let t = (rho - center) / (peak - center);
    s.apply(|v| *v = center + t * (*v - center));
}

fn planted_abundance(rng: &mut ChaCha8Rng, n: usize, k: usize, rho: f64) -> DVector<f64> {
    let mut s = DVector::zeros(n);
    if rho >= 1.0 {
        s[k] = 1.0;
        return s;
    }
    // Rejection keeps the other components at or below rho; the uniform
    // point is always admissible since rho > 1/N.
    let u = loop {
        let u = dirichlet(rng, n - 1);
        if (1.0 - rho) * u.max() <= rho {
            break u;
        }
    };
    let mut j = 0;
    for i in 0..n {
        if i == k {
            s[i] = rho;
        } else {
            s[i] = (1.0 - rho) * u[j];
            j += 1;
        }
    }
    s
}

/// Nearest pure pixels: for each endmember `k`, the pixel whose noiseless
/// spectrum `A s[n]` is closest to `a_k` (lowest index on ties).
pub fn nearest_pure_indices(instance: &MixingInstance) -> Result<IndexSet> {
    let a = instance.endmembers.data();
    let clean = a * instance.abundances.data();
    let mut out = Vec::with_capacity(a.ncols());
    for k in 0..a.ncols() {
        let ak = a.column(k);
        let mut best = (f64::INFINITY, 0);
        for (n, col) in clean.column_iter().enumerate() {
            let d = (col - ak).norm_squared();
            if d < best.0 {
                best = (d, n);
            }
        }
        out.push(best.1);
    }
    IndexSet::from_vec(out).map_err(|_| {
        Error::Degenerate("two endmembers share the same nearest pure pixel".into())
    })
}

/// A deterministic library of smooth, positive reflectance-like spectra
/// (baseline, slope and a few Gaussian features, clamped to `[0.01, 1]`).
pub fn synthetic_library(bands: usize, count: usize, seed: u64) -> Result<PixelMatrix> {
    if bands == 0 || count == 0 {
        return Err(dim("library must have at least one band and one spectrum"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lib = DMatrix::zeros(bands, count);
    for j in 0..count {
        let base = rng.random_range(0.1..0.5);
        let slope = rng.random_range(-0.3..0.3);
        let features: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| {
                (
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.03..0.2),
                    rng.random_range(-0.3..0.4),
                )
            })
            .collect();
        for i in 0..bands {
            let t = if bands == 1 { 0.5 } else { i as f64 / (bands - 1) as f64 };
            let mut v = base + slope * (t - 0.5);
            for &(center, width, amp) in &features {
                v += amp * (-((t - center) / width).powi(2) / 2.0).exp();
            }
            lib[(i, j)] = v.clamp(0.01, 1.0);
        }
    }
    PixelMatrix::new(lib)
}
