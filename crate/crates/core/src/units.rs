use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Central wavelength of a quasi-monochromatic photon, in meters.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Wavelength(f64);

impl Wavelength {
    pub fn new(lambda: f64) -> Result<Self> {
        if lambda.is_finite() && lambda > 0.0 {
            Ok(Self(lambda))
        } else {
            Err(Error::InvalidArgument(format!(
                "wavelength must be positive and finite, got {lambda:e}"
            )))
        }
    }

    #[inline]
    pub fn meters(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn wavenumber(self) -> f64 {
        2.0 * std::f64::consts::PI / self.0
    }
}

impl TryFrom<f64> for Wavelength {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Wavelength> for f64 {
    fn from(w: Wavelength) -> f64 {
        w.0
    }
}
