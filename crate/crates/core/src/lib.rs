//! Paraxial propagation of N-photon transverse amplitudes through linear
//! optical systems, with heralded detection and temporal bookkeeping.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amplitude;
pub mod engine;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod measurement;
pub mod oracles;
pub mod scenarios;
pub mod temporal;
pub mod units;

pub use amplitude::{CorrelatedSource, NPhotonAmplitude, NormConvention};
pub use engine::{
    apply_along_photon, check_validity, propagate, propagate_correlated, Propagation, SceneGeometry, TemporalBranch,
    ValidityReport,
};
pub use error::{Error, Result};
pub use grid::TransverseGrid;
pub use kernels::{Kernel, KernelMatrix, MaskSpec, PathSet, Propagator, SamplingReport, Wavelet};
pub use measurement::{herald, HeraldEvent, HeraldedState};
pub use temporal::TemporalModel;
pub use units::{Wavelength, SPEED_OF_LIGHT};
