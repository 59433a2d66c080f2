//! Fixtures shared by the benchmarks.

use nphoton::grid::gaussian_transverse;
use nphoton::kernels::{diffraction_kernel, Kernel, PathSet, Propagator, Wavelet};
use nphoton::{CorrelatedSource, NPhotonAmplitude, TemporalModel, TransverseGrid, Wavelength};

pub fn wavelength() -> Wavelength {
    Wavelength::new(0.5e-6).expect("positive wavelength")
}

pub fn grid(z: f64, half_width: f64, count: usize) -> TransverseGrid {
    TransverseGrid::new(z, 0.0, half_width, count).expect("valid grid")
}

/// Free-space kernel from an `n`-sample source plane to an `n`-sample plane
/// 10 cm away.
pub fn free_space(n: usize) -> Kernel {
    diffraction_kernel(
        &grid(0.0, 1e-3, n),
        &grid(0.1, 2e-3, n),
        wavelength(),
        Propagator::Exact,
        Wavelet::Cylindrical,
    )
    .expect("forward geometry")
}

/// Gaussian pump on `n` samples feeding `photons` identical photons.
pub fn correlated(n: usize, photons: usize) -> CorrelatedSource {
    let g = grid(0.0, 1e-3, n);
    let profile = gaussian_transverse(&g, 0.2e-3).expect("positive width");
    CorrelatedSource::new(
        g,
        vec![wavelength(); photons],
        profile,
        TemporalModel::simultaneous(photons, 1e-12, 0).expect("valid envelope"),
    )
    .expect("consistent source")
}

/// Dense two-photon amplitude on `n × n` samples.
pub fn pair(n: usize) -> NPhotonAmplitude {
    correlated(n, 2).to_amplitude().expect("materializable")
}

pub fn paths(kernel: &Kernel, photons: usize) -> Vec<PathSet> {
    vec![PathSet::single(kernel.clone()); photons]
}
