//! Single-photon propagation kernels as dense grid-to-grid operators.
//!
//! Every kernel folds the midpoint quadrature weight `Δξ_in` into its
//! entries, so propagating a sampled amplitude is a plain matrix product.

mod mask;

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TransverseGrid;
use crate::units::Wavelength;

pub use mask::MaskSpec;

/// Normalization of the secondary wavelet in the one-transverse-axis model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Wavelet {
    /// `(-i/λ) e^{ikR}/R`: the point-source wavelet evaluated in the (ξ, z)
    /// plane. Its amplitudes carry the units of the two-axis theory and the
    /// 1-D operator is not norm preserving.
    Spherical,
    /// `e^{-iπ/4} e^{ikR}/√(λR)`: the point-source wavelet integrated along
    /// the omitted transverse axis (stationary phase). Norm preserving and a
    /// semigroup in the paraxial regime.
    #[default]
    Cylindrical,
}

/// How the distance between source and observation points is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Propagator {
    /// Exact two-point distance `R = √(Δξ² + z²)`.
    #[default]
    Exact,
    /// Fresnel expansion `R ≈ z + Δξ²/2z`, with `1/R ≈ 1/z` in the amplitude.
    Paraxial,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelMatrix {
    Dense(Array2<Complex64>),
    Diagonal(Vec<Complex64>),
}

impl KernelMatrix {
    pub fn to_dense(&self) -> Array2<Complex64> {
        match self {
            Self::Dense(m) => m.clone(),
            Self::Diagonal(d) => {
                let mut m = Array2::zeros((d.len(), d.len()));
                for (i, v) in d.iter().enumerate() {
                    m[[i, i]] = *v;
                }
                m
            }
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Self::Dense(m) => m.dim(),
            Self::Diagonal(d) => (d.len(), d.len()),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        match self {
            Self::Dense(m) => m[[row, col]],
            Self::Diagonal(d) if row == col => d[row],
            Self::Diagonal(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// Column `col` as a dense vector over the output samples.
    pub fn column(&self, col: usize) -> Vec<Complex64> {
        match self {
            Self::Dense(m) => m.column(col).to_vec(),
            Self::Diagonal(d) => {
                let mut v = vec![Complex64::new(0.0, 0.0); d.len()];
                v[col] = d[col];
                v
            }
        }
    }

    fn scaled(&self, w: Complex64) -> Self {
        match self {
            Self::Dense(m) => Self::Dense(m.mapv(|c| c * w)),
            Self::Diagonal(d) => Self::Diagonal(d.iter().map(|c| c * w).collect()),
        }
    }
}

/// Outcome of the sampling criterion for one diffraction kernel: the largest
/// phase increment between adjacent entries along a row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingReport {
    pub label: String,
    pub max_phase_step_rad: f64,
    pub aliased: bool,
}

/// Single-photon propagator `h(x_out, ξ_in)` for one optical path.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    input: TransverseGrid,
    output: TransverseGrid,
    matrix: KernelMatrix,
    path_length: f64,
    wavelength: Wavelength,
    sampling: Vec<SamplingReport>,
}

impl Kernel {
    pub fn input_grid(&self) -> &TransverseGrid {
        &self.input
    }

    pub fn output_grid(&self) -> &TransverseGrid {
        &self.output
    }

    pub fn matrix(&self) -> &KernelMatrix {
        &self.matrix
    }

    pub fn path_length(&self) -> f64 {
        self.path_length
    }

    pub fn wavelength(&self) -> Wavelength {
        self.wavelength
    }

    /// Sampling reports of every diffraction step folded into this kernel.
    pub fn sampling(&self) -> &[SamplingReport] {
        &self.sampling
    }

    pub fn aliased(&self) -> bool {
        self.sampling.iter().any(|s| s.aliased)
    }

    pub fn identity(grid: &TransverseGrid, wavelength: Wavelength) -> Self {
        Self {
            input: grid.clone(),
            output: grid.clone(),
            matrix: KernelMatrix::Diagonal(vec![Complex64::new(1.0, 0.0); grid.len()]),
            path_length: 0.0,
            wavelength,
            sampling: Vec::new(),
        }
    }

    pub(crate) fn with_matrix(&self, matrix: KernelMatrix) -> Self {
        assert_eq!(matrix.shape(), self.matrix.shape());
        Self { matrix, ..self.clone() }
    }

    /// Same transfer matrix with `extra_length` of optical path added, e.g. a
    /// folded delay line.
    pub fn delayed(&self, extra_length: f64) -> Result<Self> {
        if !(extra_length >= 0.0 && extra_length.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "extra path length must be non-negative, got {extra_length:e}"
            )));
        }
        Ok(Self {
            path_length: self.path_length + extra_length,
            ..self.clone()
        })
    }

    pub fn scaled(&self, weight: Complex64) -> Self {
        Self {
            matrix: self.matrix.scaled(weight),
            ..self.clone()
        }
    }

    /// Matrix-vector product on a sampled single-photon amplitude.
    pub fn apply(&self, input: &[Complex64]) -> Result<Vec<Complex64>> {
        if input.len() != self.input.len() {
            return Err(Error::InvalidGeometry(format!(
                "vector of length {} applied to kernel with {} inputs",
                input.len(),
                self.input.len()
            )));
        }
        Ok(match &self.matrix {
            KernelMatrix::Diagonal(d) => d.iter().zip(input).map(|(a, b)| a * b).collect(),
            KernelMatrix::Dense(m) => (0..m.nrows())
                .into_par_iter()
                .map(|i| {
                    m.row(i)
                        .iter()
                        .zip(input)
                        .fold(Complex64::new(0.0, 0.0), |acc, (a, b)| acc + a * b)
                })
                .collect(),
        })
    }
}

fn phase_factor(phase: f64) -> Complex64 {
    let (s, c) = phase.sin_cos();
    Complex64::new(c, s)
}

fn check_diffraction_geometry(input: &TransverseGrid, output: &TransverseGrid) -> Result<f64> {
    let z = output.z() - input.z();
    if !(z > 0.0) {
        return Err(Error::InvalidGeometry(format!(
            "propagation needs z_out > z_in, got z_in = {:e} m, z_out = {:e} m",
            input.z(),
            output.z()
        )));
    }
    Ok(z)
}

/// Sampling criterion for a diffraction kernel: the phase of `e^{ikR}` must
/// advance by less than π between adjacent input samples anywhere on the
/// grid pair. The worst case sits at the extreme transverse offset.
pub fn diffraction_sampling(
    input: &TransverseGrid,
    output: &TransverseGrid,
    wavelength: Wavelength,
    propagator: Propagator,
) -> Result<SamplingReport> {
    let z = check_diffraction_geometry(input, output)?;
    let offset = (input.last() - output.first())
        .abs()
        .max((output.last() - input.first()).abs());
    let slope = match propagator {
        Propagator::Exact => offset / offset.hypot(z),
        Propagator::Paraxial => offset / z,
    };
    let step = wavelength.wavenumber() * slope * input.spacing();
    Ok(SamplingReport {
        label: format!(
            "{:?} λ={:e} m, z={:e} m, Δξ_in={:e} m",
            propagator,
            wavelength.meters(),
            z,
            input.spacing()
        ),
        max_phase_step_rad: step,
        aliased: step >= PI,
    })
}

/// Exact free-space propagator with the point-source wavelet, as printed:
/// `(-i/λ) exp(i2π|r-ρ|/λ) / |r-ρ| · Δξ`.
pub fn free_space_kernel(input: &TransverseGrid, output: &TransverseGrid, wavelength: Wavelength) -> Result<Kernel> {
    diffraction_kernel(input, output, wavelength, Propagator::Exact, Wavelet::Spherical)
}

/// Fresnel (paraxial) propagator with the point-source wavelet:
/// `(-i/λz) e^{ikz} e^{iπ(ξ_out-ξ_in)²/λz} · Δξ`.
pub fn fresnel_kernel(input: &TransverseGrid, output: &TransverseGrid, wavelength: Wavelength) -> Result<Kernel> {
    diffraction_kernel(input, output, wavelength, Propagator::Paraxial, Wavelet::Spherical)
}

pub fn diffraction_kernel(
    input: &TransverseGrid,
    output: &TransverseGrid,
    wavelength: Wavelength,
    propagator: Propagator,
    wavelet: Wavelet,
) -> Result<Kernel> {
    let z = check_diffraction_geometry(input, output)?;
    let report = diffraction_sampling(input, output, wavelength, propagator)?;
    if report.aliased {
        log::warn!(
            "aliasing: kernel phase advances {:.3} rad between adjacent samples ({})",
            report.max_phase_step_rad,
            report.label
        );
    }

    let lambda = wavelength.meters();
    let k = wavelength.wavenumber();
    let dx = input.spacing();
    // e^{ikz} is split off and reduced in cycles so that the large axial
    // phase does not swamp the transverse part in double precision.
    let axial = phase_factor(TAU * (z / lambda).rem_euclid(1.0));
    let rows = output.len();
    let cols = input.len();
    let xin = input.to_vec();

    let entry = |xo: f64, xi: f64| -> Complex64 {
        let d = xo - xi;
        let (excess, r) = match propagator {
            Propagator::Exact => {
                let r = d.hypot(z);
                (d * d / (r + z), r)
            }
            Propagator::Paraxial => (d * d / (2.0 * z), z),
        };
        let amp = match wavelet {
            Wavelet::Spherical => Complex64::new(0.0, -1.0) / (lambda * r),
            Wavelet::Cylindrical => phase_factor(-FRAC_PI_4) / (lambda * r).sqrt(),
        };
        amp * axial * phase_factor(k * excess) * dx
    };

    let data: Vec<Complex64> = (0..rows)
        .into_par_iter()
        .flat_map_iter(|i| {
            let xo = output.coord(i);
            xin.iter().map(move |&xi| (xo, xi))
        })
        .map(|(xo, xi)| entry(xo, xi))
        .collect();
    let matrix = Array2::from_shape_vec((rows, cols), data).expect("row-major kernel shape");

    Ok(Kernel {
        input: input.clone(),
        output: output.clone(),
        matrix: KernelMatrix::Dense(matrix),
        path_length: z,
        wavelength,
        sampling: vec![report],
    })
}

/// Thin lens of focal length `f`: diagonal `exp(-iπξ²/λf)`.
pub fn lens_kernel(grid: &TransverseGrid, focal_length: f64, wavelength: Wavelength) -> Result<Kernel> {
    if focal_length == 0.0 || !focal_length.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lens focal length must be finite and nonzero, got {focal_length:e}"
        )));
    }
    let c = PI / (wavelength.meters() * focal_length);
    let diag = grid.samples().map(|x| phase_factor(-c * x * x)).collect();
    Ok(Kernel {
        input: grid.clone(),
        output: grid.clone(),
        matrix: KernelMatrix::Diagonal(diag),
        path_length: 0.0,
        wavelength,
        sampling: Vec::new(),
    })
}

/// Thin mask: diagonal of the sampled transmission.
pub fn mask_kernel(grid: &TransverseGrid, mask: &MaskSpec, wavelength: Wavelength) -> Result<Kernel> {
    Ok(Kernel {
        input: grid.clone(),
        output: grid.clone(),
        matrix: KernelMatrix::Diagonal(mask.transmission(grid)?),
        path_length: 0.0,
        wavelength,
        sampling: Vec::new(),
    })
}

/// `second ∘ first`: the matrix product `second · first`, path lengths add.
pub fn compose(first: &Kernel, second: &Kernel) -> Result<Kernel> {
    if !first.output.same_sampling(&second.input) {
        return Err(Error::InvalidGeometry(format!(
            "cannot compose: first kernel ends on {:?}, second starts on {:?}",
            first.output, second.input
        )));
    }
    if first.wavelength != second.wavelength {
        return Err(Error::InvalidGeometry(
            "cannot compose kernels of different wavelengths".into(),
        ));
    }
    let matrix = match (&second.matrix, &first.matrix) {
        (KernelMatrix::Diagonal(b), KernelMatrix::Diagonal(a)) => {
            KernelMatrix::Diagonal(b.iter().zip(a).map(|(x, y)| x * y).collect())
        }
        (KernelMatrix::Diagonal(b), KernelMatrix::Dense(a)) => {
            let mut m = a.clone();
            for (mut row, w) in m.outer_iter_mut().zip(b) {
                row.mapv_inplace(|c| c * w);
            }
            KernelMatrix::Dense(m)
        }
        (KernelMatrix::Dense(b), KernelMatrix::Diagonal(a)) => {
            let mut m = b.clone();
            for mut row in m.outer_iter_mut() {
                for (c, w) in row.iter_mut().zip(a) {
                    *c *= w;
                }
            }
            KernelMatrix::Dense(m)
        }
        (KernelMatrix::Dense(b), KernelMatrix::Dense(a)) => KernelMatrix::Dense(matmul(b, a)),
    };
    let mut sampling = first.sampling.clone();
    sampling.extend(second.sampling.iter().cloned());
    Ok(Kernel {
        input: first.input.clone(),
        output: second.output.clone(),
        matrix,
        path_length: first.path_length + second.path_length,
        wavelength: first.wavelength,
        sampling,
    })
}

/// Composes a chain of kernels applied in order.
pub fn compose_chain(kernels: &[Kernel]) -> Result<Kernel> {
    let (last, rest) = kernels
        .split_last()
        .ok_or_else(|| Error::InvalidArgument("empty kernel chain".into()))?;
    // Right-to-left keeps intermediates at the size of the output grid.
    rest.iter().rev().try_fold(last.clone(), |acc, k| compose(k, &acc))
}

/// Dense complex product `b · a`, parallel over output rows with a fixed
/// summation order per entry.
pub(crate) fn matmul(b: &Array2<Complex64>, a: &Array2<Complex64>) -> Array2<Complex64> {
    let (p, q) = b.dim();
    let (q2, r) = a.dim();
    assert_eq!(q, q2, "inner dimensions");
    let a_std = a.as_standard_layout();
    let a_flat = a_std.as_slice().expect("standard layout");
    let data: Vec<Complex64> = (0..p)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut out = vec![Complex64::new(0.0, 0.0); r];
            for (k, bik) in b.row(i).iter().enumerate() {
                if bik.re == 0.0 && bik.im == 0.0 {
                    continue;
                }
                for (o, akj) in out.iter_mut().zip(&a_flat[k * r..(k + 1) * r]) {
                    *o += bik * akj;
                }
            }
            out
        })
        .collect();
    Array2::from_shape_vec((p, r), data).expect("product shape")
}

/// The propagators of one photon through every path `k` between the source
/// plane and its detector, path weights already folded in.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    paths: Vec<Kernel>,
}

impl PathSet {
    pub fn new(paths: Vec<(Kernel, Complex64)>) -> Result<Self> {
        let (first, _) = paths
            .first()
            .ok_or_else(|| Error::InvalidArgument("a path set needs at least one path".into()))?;
        for (k, _) in &paths[1..] {
            if !k.input.same_sampling(&first.input)
                || !k.output.same_sampling(&first.output)
                || k.wavelength != first.wavelength
            {
                return Err(Error::InvalidGeometry(
                    "all paths of a photon must share input grid, output grid and wavelength".into(),
                ));
            }
        }
        Ok(Self {
            paths: paths.into_iter().map(|(k, w)| k.scaled(w)).collect(),
        })
    }

    pub fn single(kernel: Kernel) -> Self {
        Self { paths: vec![kernel] }
    }

    pub fn paths(&self) -> &[Kernel] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn input_grid(&self) -> &TransverseGrid {
        self.paths[0].input_grid()
    }

    pub fn output_grid(&self) -> &TransverseGrid {
        self.paths[0].output_grid()
    }

    pub fn wavelength(&self) -> Wavelength {
        self.paths[0].wavelength()
    }

    pub fn path_lengths(&self) -> Vec<f64> {
        self.paths.iter().map(Kernel::path_length).collect()
    }

    pub fn aliased(&self) -> bool {
        self.paths.iter().any(Kernel::aliased)
    }

    /// Sum of all path kernels, ignoring their distinct delays.
    pub fn effective_kernel(&self) -> Kernel {
        let mut acc = self.paths[0].clone();
        acc.matrix = KernelMatrix::Dense(acc.matrix.to_dense());
        for k in &self.paths[1..] {
            if let KernelMatrix::Dense(m) = &mut acc.matrix {
                *m += &k.matrix.to_dense();
            }
            acc.sampling.extend(k.sampling.iter().cloned());
        }
        acc
    }
}

pub fn path_set(paths: Vec<(Kernel, Complex64)>) -> Result<PathSet> {
    PathSet::new(paths)
}

#[cfg(test)]
mod tests;
