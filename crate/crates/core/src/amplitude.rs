use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{vector_norm, TransverseGrid};
use crate::temporal::TemporalModel;
use crate::units::Wavelength;

const UNIT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormConvention {
    UnitNormalized,
    Unnormalized,
}

/// Sampled slowly varying N-photon amplitude `a(x_1, t_1, …, x_N, t_N)`.
///
/// The spatial dependence is a dense complex tensor with one axis per photon;
/// the temporal dependence is held symbolically by [`TemporalModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct NPhotonAmplitude {
    grids: Vec<TransverseGrid>,
    wavelengths: Vec<Wavelength>,
    tensor: ArrayD<Complex64>,
    temporal: TemporalModel,
    convention: NormConvention,
}

impl NPhotonAmplitude {
    pub fn new(
        grids: Vec<TransverseGrid>,
        wavelengths: Vec<Wavelength>,
        tensor: ArrayD<Complex64>,
        temporal: TemporalModel,
        convention: NormConvention,
    ) -> Result<Self> {
        let n = grids.len();
        if n == 0 {
            return Err(Error::InvalidArgument("an amplitude needs at least one photon".into()));
        }
        if wavelengths.len() != n || temporal.photons() != n {
            return Err(Error::InvalidArgument(format!(
                "{n} grids but {} wavelengths and {} temporal entries",
                wavelengths.len(),
                temporal.photons()
            )));
        }
        let shape: Vec<usize> = grids.iter().map(TransverseGrid::len).collect();
        if tensor.shape() != shape.as_slice() {
            return Err(Error::InvalidArgument(format!(
                "tensor shape {:?} does not match grids {shape:?}",
                tensor.shape()
            )));
        }
        let amp = Self {
            grids,
            wavelengths,
            tensor,
            temporal,
            convention,
        };
        if convention == NormConvention::UnitNormalized {
            let nrm = amp.norm();
            if (nrm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::InvalidArgument(format!(
                    "amplitude flagged unit-normalized has norm {nrm}"
                )));
            }
        }
        Ok(amp)
    }

    /// Single-photon amplitude from sampled values.
    pub fn single(
        grid: TransverseGrid,
        wavelength: Wavelength,
        values: Vec<Complex64>,
        envelope_rms: f64,
    ) -> Result<Self> {
        let len = values.len();
        let tensor =
            ArrayD::from_shape_vec(IxDyn(&[len]), values).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Self::new(
            vec![grid],
            vec![wavelength],
            tensor,
            TemporalModel::simultaneous(1, envelope_rms, 0)?,
            NormConvention::Unnormalized,
        )
    }

    /// Outer product of single-photon factors `u_1 ⊗ … ⊗ u_N`.
    pub fn product(
        factors: Vec<(TransverseGrid, Wavelength, Vec<Complex64>)>,
        temporal: TemporalModel,
    ) -> Result<Self> {
        let shape: Vec<usize> = factors.iter().map(|f| f.0.len()).collect();
        for (g, _, v) in &factors {
            if g.len() != v.len() {
                return Err(Error::InvalidArgument("factor length does not match its grid".into()));
            }
        }
        let tensor = ArrayD::from_shape_fn(IxDyn(&shape), |idx| {
            factors
                .iter()
                .enumerate()
                .fold(Complex64::new(1.0, 0.0), |acc, (k, f)| acc * f.2[idx[k]])
        });
        let (grids, wavelengths) = factors.into_iter().map(|(g, w, _)| (g, w)).unzip();
        Self::new(grids, wavelengths, tensor, temporal, NormConvention::Unnormalized)
    }

    pub fn photons(&self) -> usize {
        self.grids.len()
    }

    pub fn grids(&self) -> &[TransverseGrid] {
        &self.grids
    }

    pub fn grid(&self, photon: usize) -> &TransverseGrid {
        &self.grids[photon]
    }

    pub fn wavelengths(&self) -> &[Wavelength] {
        &self.wavelengths
    }

    pub fn tensor(&self) -> &ArrayD<Complex64> {
        &self.tensor
    }

    pub fn temporal(&self) -> &TemporalModel {
        &self.temporal
    }

    pub fn convention(&self) -> NormConvention {
        self.convention
    }

    /// Product of the grid spacings, i.e. the volume element of the tensor.
    pub fn cell_measure(&self) -> f64 {
        self.grids.iter().map(TransverseGrid::spacing).product()
    }

    /// Discrete L2 norm `sqrt(Σ|a|² ∏Δξ_i)`.
    pub fn norm(&self) -> f64 {
        (self.tensor.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.cell_measure()).sqrt()
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        out.tensor.mapv_inplace(|c| c * factor);
        if factor.norm() != 1.0 {
            out.convention = NormConvention::Unnormalized;
        }
        out
    }

    /// Rescales to unit norm; fails on the zero amplitude.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidArgument("cannot normalize a zero amplitude".into()));
        }
        let mut out = self.scaled(Complex64::new(1.0 / n, 0.0));
        out.convention = NormConvention::UnitNormalized;
        Ok(out)
    }

    pub(crate) fn from_parts_unchecked(
        grids: Vec<TransverseGrid>,
        wavelengths: Vec<Wavelength>,
        tensor: ArrayD<Complex64>,
        temporal: TemporalModel,
    ) -> Self {
        Self {
            grids,
            wavelengths,
            tensor,
            temporal,
            convention: NormConvention::Unnormalized,
        }
    }

    /// Amplitude on the tensor sample nearest to the given positions.
    pub fn value_at(&self, positions: &[f64]) -> Result<Complex64> {
        if positions.len() != self.photons() {
            return Err(Error::InvalidArgument(format!(
                "expected {} positions, got {}",
                self.photons(),
                positions.len()
            )));
        }
        let idx = positions
            .iter()
            .zip(&self.grids)
            .map(|(&x, g)| g.nearest(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.tensor[IxDyn(&idx)])
    }
}

pub fn norm(amplitude: &NPhotonAmplitude) -> f64 {
    amplitude.norm()
}

/// Source whose photons are perfectly position-correlated:
/// `g(ρ_N) ∏_{j<N} δ(ρ_j - ρ_N)` on a shared grid.
///
/// Kept separate from [`NPhotonAmplitude`] because materializing the
/// regularized deltas needs `M^N` storage; the engine contracts it directly.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatedSource {
    grid: TransverseGrid,
    wavelengths: Vec<Wavelength>,
    profile: Vec<Complex64>,
    temporal: TemporalModel,
}

impl CorrelatedSource {
    pub fn new(
        grid: TransverseGrid,
        wavelengths: Vec<Wavelength>,
        profile: Vec<Complex64>,
        temporal: TemporalModel,
    ) -> Result<Self> {
        if wavelengths.is_empty() || temporal.photons() != wavelengths.len() {
            return Err(Error::InvalidArgument(
                "photon count mismatch between wavelengths and temporal model".into(),
            ));
        }
        if profile.len() != grid.len() {
            return Err(Error::InvalidArgument("profile length does not match grid".into()));
        }
        Ok(Self {
            grid,
            wavelengths,
            profile,
            temporal,
        })
    }

    pub fn photons(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn grid(&self) -> &TransverseGrid {
        &self.grid
    }

    pub fn wavelengths(&self) -> &[Wavelength] {
        &self.wavelengths
    }

    pub fn profile(&self) -> &[Complex64] {
        &self.profile
    }

    pub fn temporal(&self) -> &TemporalModel {
        &self.temporal
    }

    /// Norm of the profile `g` alone; the full amplitude is not normalizable
    /// in the continuum limit.
    pub fn profile_norm(&self) -> f64 {
        vector_norm(&self.grid, &self.profile)
    }

    /// Dense tensor with the deltas regularized as `1/Δξ` on the diagonal.
    /// Storage is `M^N`; meant for small grids.
    pub fn to_amplitude(&self) -> Result<NPhotonAmplitude> {
        let n = self.photons();
        let m = self.grid.len();
        let shape = vec![m; n];
        let weight = self.grid.spacing().powi(1 - n as i32);
        let mut tensor = ArrayD::zeros(IxDyn(&shape));
        for (i, g) in self.profile.iter().enumerate() {
            let idx = vec![i; n];
            tensor[IxDyn(&idx)] = *g * weight;
        }
        NPhotonAmplitude::new(
            vec![self.grid.clone(); n],
            self.wavelengths.clone(),
            tensor,
            self.temporal.clone(),
            NormConvention::Unnormalized,
        )
    }
}
