//! End-to-end pipelines for the ghost-imaging interferometer and the
//! triphoton imaging setup, plus the profile analysis they report.

mod analysis;
mod example1;
mod example2;
pub mod pipeline;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::TransverseGrid;

pub use analysis::{fringe_period, quadratic_coefficient, scale_fitted_l2, unwrap_phase, visibility};
pub use example1::{run_example1, sweep_phase, Example1Config, Example1Result, Example1Setup, PhaseRow};
pub use example2::{run_example2, Example2Config, Example2Result, HeraldLens};

/// Uniform transverse sampling `[center - half_width, center + half_width]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub center_m: f64,
    pub half_width_m: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn new(half_width_m: f64, count: usize) -> Self {
        Self {
            center_m: 0.0,
            half_width_m,
            count,
        }
    }

    /// `count` samples spaced `spacing_m` apart, symmetric about zero.
    pub fn with_spacing(spacing_m: f64, count: usize) -> Self {
        Self::new(spacing_m * (count - 1) as f64 / 2.0, count)
    }

    pub fn at(&self, z: f64) -> Result<TransverseGrid> {
        TransverseGrid::new(z, self.center_m, self.half_width_m, self.count)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width_m / (self.count.max(2) - 1) as f64
    }
}
