//! Greedy self-dictionary sparse regression for hyperspectral endmember
//! extraction.
//!
//! * [`model`]: mixing-model types, synthetic scenes, affine-set reduction, I/O.
//! * [`simplexls`]: least squares over the unit simplex.
//! * [`greedy`]: ℓq SD-SOMP with its stopping rules.
//! * [`noise`]: regression-based noise bound estimation.
//! * [`oracle`]: brute-force ground truth and theory diagnostics.
//! * [`metrics`]: detection probability, model-order statistics, MRSA.
//! * [`experiment`]: the unmixing pipeline and Monte-Carlo sweeps.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod greedy;
pub mod metrics;
pub mod model;
pub mod noise;
pub mod oracle;
pub mod simplexls;

pub use error::{Error, Result};
pub use experiment::{unmix, UnmixOptions, UnmixReport};
pub use greedy::{run_sd_somp, SelectionTrace, SompConfig, SompResult, StopReason, Stopping};
pub use model::{
    AbundanceMatrix, EndmemberMatrix, IndexSet, MixingInstance, PixelMatrix, SynthParams,
};
pub use simplexls::{solve_simplex_ls, FclsOptions, SimplexLsSolution};
