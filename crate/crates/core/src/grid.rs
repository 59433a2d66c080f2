use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SPACING_TOLERANCE: f64 = 1e-9;

/// Uniform one-dimensional sampling of a transverse coordinate on a plane
/// at fixed axial position `z`.
///
/// Samples are stored implicitly as `start + i * spacing`, which keeps the
/// spacing uniform by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransverseGrid {
    z: f64,
    start: f64,
    spacing: f64,
    count: usize,
}

impl TransverseGrid {
    /// Grid spanning `[center - half_width, center + half_width]` with `count`
    /// samples, both endpoints included.
    pub fn new(z: f64, center: f64, half_width: f64, count: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "half_width must be positive, got {half_width:e}"
            )));
        }
        if count < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 samples, got {count}"
            )));
        }
        if !(z.is_finite() && center.is_finite()) {
            return Err(Error::InvalidArgument("non-finite grid position".into()));
        }
        Ok(Self {
            z,
            start: center - half_width,
            spacing: 2.0 * half_width / (count - 1) as f64,
            count,
        })
    }

    /// Builds a grid from explicit sample positions, checking that they are
    /// strictly increasing and uniformly spaced.
    pub fn from_samples(z: f64, samples: &[f64]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        let n = samples.len();
        let spacing = (samples[n - 1] - samples[0]) / (n - 1) as f64;
        if !(spacing > 0.0) {
            return Err(Error::InvalidArgument("samples must be strictly increasing".into()));
        }
        for (i, w) in samples.windows(2).enumerate() {
            let step = w[1] - w[0];
            if step <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "samples not strictly increasing at index {i}"
                )));
            }
            if ((step - spacing) / spacing).abs() > SPACING_TOLERANCE {
                return Err(Error::InvalidArgument(format!(
                    "non-uniform spacing at index {i}: {step:e} vs {spacing:e}"
                )));
            }
        }
        Ok(Self {
            z,
            start: samples[0],
            spacing,
            count: n,
        })
    }

    #[inline]
    pub fn z(&self) -> f64 {
        self.z
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    #[inline]
    pub fn first(&self) -> f64 {
        self.start
    }

    #[inline]
    pub fn last(&self) -> f64 {
        self.coord(self.count - 1)
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.first() + self.last())
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.last() - self.first())
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        self.start + i as f64 * self.spacing
    }

    pub fn samples(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.count).map(move |i| self.coord(i))
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.samples().collect()
    }

    /// Same transverse sampling moved to another axial position.
    pub fn at_z(&self, z: f64) -> Self {
        Self { z, ..self.clone() }
    }

    pub fn contains(&self, x: f64) -> bool {
        let eps = 1e-9 * self.spacing;
        x >= self.first() - eps && x <= self.last() + eps
    }

    /// Index of the sample nearest to `x`; `x` must lie within the span.
    pub fn nearest(&self, x: f64) -> Result<usize> {
        if !x.is_finite() || !self.contains(x) {
            return Err(Error::OutOfRange {
                what: "position",
                value: x,
                lo: self.first(),
                hi: self.last(),
            });
        }
        let i = ((x - self.start) / self.spacing).round();
        Ok((i.max(0.0) as usize).min(self.count - 1))
    }

    /// Grids are compatible when they sample the same plane identically.
    pub fn same_sampling(&self, other: &Self) -> bool {
        let tol = 1e-9 * self.spacing.max(other.spacing);
        self.count == other.count
            && (self.start - other.start).abs() <= tol
            && (self.spacing - other.spacing).abs() <= 1e-9 * self.spacing
            && (self.z - other.z).abs() <= 1e-12 * (1.0 + self.z.abs())
    }
}

pub fn make_grid(z: f64, center: f64, half_width: f64, count: usize) -> Result<TransverseGrid> {
    TransverseGrid::new(z, center, half_width, count)
}

/// Regularized Dirac delta: weight `1/Δξ` at the sample nearest to
/// `location`, so that the discrete integral is exactly one.
pub fn delta_on_grid(grid: &TransverseGrid, location: f64) -> Result<Vec<Complex64>> {
    let idx = grid.nearest(location)?;
    let mut v = vec![Complex64::new(0.0, 0.0); grid.len()];
    v[idx] = Complex64::new(1.0 / grid.spacing(), 0.0);
    Ok(v)
}

/// Samples of `exp(-ξ²/4S²) / (2πS²)^{1/4}`: the one-dimensional marginal of
/// a Gaussian source profile with rms intensity half-width `s`.
pub fn gaussian_transverse(grid: &TransverseGrid, s: f64) -> Result<Vec<Complex64>> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "Gaussian width must be positive, got {s:e}"
        )));
    }
    let norm = (2.0 * std::f64::consts::PI * s * s).powf(-0.25);
    Ok(grid
        .samples()
        .map(|x| Complex64::new(norm * (-x * x / (4.0 * s * s)).exp(), 0.0))
        .collect())
}

/// Discrete L2 norm `sqrt(Σ|u|² Δξ)` of a sampled single-photon amplitude.
pub fn vector_norm(grid: &TransverseGrid, values: &[Complex64]) -> f64 {
    (values.iter().map(|c| c.norm_sqr()).sum::<f64>() * grid.spacing()).sqrt()
}
