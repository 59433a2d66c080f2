use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TransverseGrid;

const TRANSMISSION_SLACK: f64 = 1e-12;

/// Complex amplitude transmission of a thin mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MaskSpec {
    /// Two slits of width `width_m` whose centers sit at
    /// `offset_m ± separation_m / 2`, transmitting `exp(i phase_rad)`.
    DoubleSlit {
        separation_m: f64,
        width_m: f64,
        #[serde(default)]
        offset_m: f64,
        #[serde(default)]
        phase_rad: f64,
    },
    /// `exp(-(ξ - center)² / width²) · exp(i phase_rad)`.
    GaussianAperture {
        width_m: f64,
        #[serde(default)]
        center_m: f64,
        #[serde(default)]
        phase_rad: f64,
    },
    /// `exp(i (phase + tilt·ξ + curvature·ξ²))`.
    PhaseOnly {
        #[serde(default)]
        phase_rad: f64,
        #[serde(default)]
        tilt_rad_per_m: f64,
        #[serde(default)]
        curvature_rad_per_m2: f64,
    },
    /// One complex transmission value per grid sample.
    Tabulated { re: Vec<f64>, im: Vec<f64> },
}

impl MaskSpec {
    pub fn double_slit(separation: f64, width: f64, offset: f64, phase: f64) -> Self {
        Self::DoubleSlit {
            separation_m: separation,
            width_m: width,
            offset_m: offset,
            phase_rad: phase,
        }
    }

    pub fn tabulated(values: &[Complex64]) -> Self {
        Self::Tabulated {
            re: values.iter().map(|c| c.re).collect(),
            im: values.iter().map(|c| c.im).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::DoubleSlit {
                separation_m,
                width_m,
                offset_m,
                phase_rad,
            } => {
                if !(*width_m > 0.0 && width_m < separation_m) {
                    return Err(Error::InvalidArgument(format!(
                        "double slit needs 0 < width < separation, got width {width_m:e}, separation {separation_m:e}"
                    )));
                }
                if !(offset_m.is_finite() && phase_rad.is_finite()) {
                    return Err(Error::InvalidArgument("non-finite double-slit parameter".into()));
                }
            }
            Self::GaussianAperture {
                width_m,
                center_m,
                phase_rad,
            } => {
                if !(*width_m > 0.0 && center_m.is_finite() && phase_rad.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "Gaussian aperture width must be positive, got {width_m:e}"
                    )));
                }
            }
            Self::PhaseOnly {
                phase_rad,
                tilt_rad_per_m,
                curvature_rad_per_m2,
            } => {
                if ![phase_rad, tilt_rad_per_m, curvature_rad_per_m2]
                    .iter()
                    .all(|v| v.is_finite())
                {
                    return Err(Error::InvalidArgument("non-finite phase coefficient".into()));
                }
            }
            Self::Tabulated { re, im } => {
                if re.len() != im.len() {
                    return Err(Error::InvalidArgument(
                        "tabulated mask needs equally long re and im arrays".into(),
                    ));
                }
                if let Some(i) = re
                    .iter()
                    .zip(im)
                    .position(|(r, i)| !(r.hypot(*i) <= 1.0 + TRANSMISSION_SLACK))
                {
                    return Err(Error::InvalidArgument(format!(
                        "tabulated transmission exceeds unit modulus at sample {i}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Sampled transmission on `grid`.
    pub fn transmission(&self, grid: &TransverseGrid) -> Result<Vec<Complex64>> {
        self.validate()?;
        Ok(match self {
            Self::DoubleSlit {
                separation_m,
                width_m,
                offset_m,
                phase_rad,
            } => {
                let open = Complex64::from_polar(1.0, *phase_rad);
                let centers = [offset_m - separation_m / 2.0, offset_m + separation_m / 2.0];
                grid.samples()
                    .map(|x| {
                        if centers.iter().any(|c| (x - c).abs() < width_m / 2.0) {
                            open
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect()
            }
            Self::GaussianAperture {
                width_m,
                center_m,
                phase_rad,
            } => grid
                .samples()
                .map(|x| {
                    let u = (x - center_m) / width_m;
                    Complex64::from_polar((-u * u).exp(), *phase_rad)
                })
                .collect(),
            Self::PhaseOnly {
                phase_rad,
                tilt_rad_per_m,
                curvature_rad_per_m2,
            } => grid
                .samples()
                .map(|x| Complex64::from_polar(1.0, phase_rad + tilt_rad_per_m * x + curvature_rad_per_m2 * x * x))
                .collect(),
            Self::Tabulated { re, im } => {
                if re.len() != grid.len() {
                    return Err(Error::InvalidArgument(format!(
                        "tabulated mask has {} samples but the grid has {}",
                        re.len(),
                        grid.len()
                    )));
                }
                re.iter().zip(im).map(|(&r, &i)| Complex64::new(r, i)).collect()
            }
        })
    }

    /// Largest distance of the mask's open structure from the optical axis,
    /// the `d` of the far-field conditions. `None` for masks without a
    /// compact feature size.
    pub fn extent(&self) -> Option<f64> {
        match self {
            Self::DoubleSlit {
                separation_m, offset_m, ..
            } => Some(
                (offset_m - separation_m / 2.0)
                    .abs()
                    .max((offset_m + separation_m / 2.0).abs()),
            ),
            Self::GaussianAperture { width_m, center_m, .. } => Some(center_m.abs() + width_m),
            Self::PhaseOnly { .. } | Self::Tabulated { .. } => None,
        }
    }

    /// Copy with an extra uniform phase applied.
    pub fn with_extra_phase(&self, phase: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::DoubleSlit { phase_rad, .. }
            | Self::GaussianAperture { phase_rad, .. }
            | Self::PhaseOnly { phase_rad, .. } => *phase_rad += phase,
            Self::Tabulated { re, im } => {
                let rot = Complex64::from_polar(1.0, phase);
                for (r, i) in re.iter_mut().zip(im.iter_mut()) {
                    let c = Complex64::new(*r, *i) * rot;
                    *r = c.re;
                    *i = c.im;
                }
            }
        }
        out
    }
}
