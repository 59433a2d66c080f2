//! Closed-form references: Fraunhofer transforms, Gaussian beams, thin-lens
//! imaging and the lens condition that flattens the heralded phase.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::MaskSpec;
use crate::units::Wavelength;

fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-8 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

/// Fourier transform `M̃(q) = ∫ M(ξ) e^{-iqξ} dξ` of a double-slit mask at
/// spatial frequency `q = 2πx/(λL)`:
/// `2 w sinc(q w/2) cos(q δ/2) e^{-i q Δ} e^{iφ}`.
pub fn fraunhofer_double_slit(mask: &MaskSpec, wavelength: Wavelength, distance: f64, x: f64) -> Result<Complex64> {
    let MaskSpec::DoubleSlit {
        separation_m,
        width_m,
        offset_m,
        phase_rad,
    } = *mask
    else {
        return Err(Error::InvalidArgument(
            "the Fraunhofer oracle needs a double-slit mask".into(),
        ));
    };
    if !(distance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "distance must be positive, got {distance:e}"
        )));
    }
    mask.validate()?;
    let q = 2.0 * PI * x / (wavelength.meters() * distance);
    let real = 2.0 * width_m * sinc(q * width_m / 2.0) * (q * separation_m / 2.0).cos();
    Ok(Complex64::from_polar(real, phase_rad - q * offset_m))
}

/// `|Σ_k M̃_k(x)|²` for a set of double-slit masks.
pub fn fraunhofer_intensity(masks: &[MaskSpec], wavelength: Wavelength, distance: f64, x: f64) -> Result<f64> {
    let mut sum = Complex64::new(0.0, 0.0);
    for m in masks {
        sum += fraunhofer_double_slit(m, wavelength, distance, x)?;
    }
    Ok(sum.norm_sqr())
}

/// `1/e²` intensity radius `w(z) = w₀ √(1 + (zλ/πw₀²)²)`; equals twice the
/// rms width of the intensity.
pub fn gaussian_beam_width(waist: f64, wavelength: Wavelength, z: f64) -> Result<f64> {
    if !(waist > 0.0 && waist.is_finite()) {
        return Err(Error::InvalidArgument(format!("waist must be positive, got {waist:e}")));
    }
    let zr = rayleigh_range(waist, wavelength);
    Ok(waist * (1.0 + (z / zr).powi(2)).sqrt())
}

pub fn rayleigh_range(waist: f64, wavelength: Wavelength) -> f64 {
    PI * waist * waist / wavelength.meters()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagingParams {
    pub magnification: f64,
    pub focal_length: f64,
}

/// Thin lens imaging the plane at distance `s0 + s1` onto the plane `s2`
/// behind it: `M = s2/(s0+s1)`, `1/f = 1/(s0+s1) + 1/s2`.
pub fn imaging_params(s0: f64, s1: f64, s2: f64) -> Result<ImagingParams> {
    let object = s0 + s1;
    if !(s0 >= 0.0 && s1 >= 0.0 && object > 0.0 && s2 > 0.0 && object.is_finite() && s2.is_finite()) {
        return Err(Error::InvalidGeometry(format!(
            "imaging needs a positive object distance and image distance, got s0+s1 = {object:e}, s2 = {s2:e}"
        )));
    }
    Ok(ImagingParams {
        magnification: s2 / object,
        focal_length: object * s2 / (object + s2),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensFlatnessSolution {
    pub f2: f64,
    pub feasible: bool,
    /// `s4 (s0+s3)/(s0+s3+s4)`.
    pub lower: f64,
    /// `s4`.
    pub upper: f64,
    /// `2 (λ2/λ1) M (M+1)`.
    pub target: f64,
    /// Relative deviation of the substituted condition from `target`.
    pub residual: f64,
}

/// Right-hand side `s2 / ((1/f2 - 1/s4)^{-1} - (s0+s3))` of the flatness
/// condition.
pub fn flatness_condition(f2: f64, s0: f64, s2: f64, s3: f64, s4: f64) -> f64 {
    s2 / (1.0 / (1.0 / f2 - 1.0 / s4) - (s0 + s3))
}

/// Focal length `f2` of the herald-arm lens that cancels the quadratic phase
/// of the heralded two-photon amplitude:
/// `2 (λ2/λ1) M (M+1) = s2 / ((1/f2 - 1/s4)^{-1} - (s0+s3))`.
///
/// `M` is the magnification of the imaging arm. For `M > 0` a solution
/// always lies within the bounds; other signs are accepted and reported
/// infeasible when they leave them.
pub fn solve_flatness_f2(
    lambda1: Wavelength,
    lambda2: Wavelength,
    magnification: f64,
    s0: f64,
    s2: f64,
    s3: f64,
    s4: f64,
) -> Result<LensFlatnessSolution> {
    for (name, v) in [("s0", s0), ("s2", s2), ("s3", s3), ("s4", s4)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be positive, got {v:e}")));
        }
    }
    let m = magnification;
    let target = 2.0 * (lambda2.meters() / lambda1.meters()) * m * (m + 1.0);
    if !(target.is_finite() && target != 0.0) {
        return Err(Error::NoSolution(format!(
            "target 2(λ2/λ1)M(M+1) = {target:e} for M = {m}"
        )));
    }
    // (1/f2 - 1/s4)^{-1} = v
    let v = s0 + s3 + s2 / target;
    if v == 0.0 || v + s4 == 0.0 {
        return Err(Error::NoSolution(format!("degenerate lens condition for M = {m}")));
    }
    let f2 = v * s4 / (v + s4);
    let lower = s4 * (s0 + s3) / (s0 + s3 + s4);
    let upper = s4;
    let residual = ((flatness_condition(f2, s0, s2, s3, s4) - target) / target).abs();
    Ok(LensFlatnessSolution {
        f2,
        feasible: lower < f2 && f2 < upper,
        lower,
        upper,
        target,
        residual,
    })
}
