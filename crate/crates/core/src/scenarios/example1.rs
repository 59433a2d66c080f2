//! Ghost imaging through a Mach-Zehnder interferometer with a mask in each
//! arm. Photon a (index 0) travels `s0 + s1` in free space to the scanning
//! detector D_a. Photon b (index 1) travels `s0 + s2` to the interferometer,
//! through mask M1 or M2, and `s3` on to the herald detector D_b.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::analysis::{fringe_period, scale_fitted_l2, visibility};
use super::GridSpec;
use crate::amplitude::CorrelatedSource;
use crate::engine::{check_validity, propagate_correlated, SceneGeometry, ValidityReport, DEFAULT_VALIDITY_THRESHOLD};
use crate::error::{Error, Result};
use crate::grid::{gaussian_transverse, TransverseGrid};
use crate::kernels::{
    compose, diffraction_kernel, diffraction_sampling, mask_kernel, Kernel, MaskSpec, PathSet, Propagator,
    SamplingReport, Wavelet,
};
use crate::measurement::{herald, intensity_profile, HeraldEvent};
use crate::oracles::fraunhofer_double_slit;
use crate::temporal::TemporalModel;
use crate::units::{Wavelength, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example1Config {
    pub wavelength_m: f64,
    /// Transverse rms width `S` of the pump.
    pub pump_width_m: f64,
    /// Rms duration `T` of the emission envelope.
    pub envelope_rms_s: f64,
    pub s0_m: f64,
    pub s1_m: f64,
    pub s2_m: f64,
    pub s3_m: f64,
    pub mask1: MaskSpec,
    pub mask2: MaskSpec,
    /// Interferometric phase `φ`, applied on the M2 arm.
    #[serde(default)]
    pub phase_rad: f64,
    pub source_grid: GridSpec,
    pub mask_grid: GridSpec,
    pub detector_a_grid: GridSpec,
    pub detector_b_grid: GridSpec,
    #[serde(default)]
    pub herald_position_m: f64,
    /// Herald detection time; defaults to the arrival time of photon b.
    #[serde(default)]
    pub herald_time_s: Option<f64>,
    #[serde(default)]
    pub propagator: Propagator,
    #[serde(default)]
    pub wavelet: Wavelet,
    #[serde(default = "default_threshold")]
    pub validity_threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_VALIDITY_THRESHOLD
}

impl Default for Example1Config {
    /// 200 µm double slits in both arms, unfolded ghost distance 1 m.
    fn default() -> Self {
        Self {
            wavelength_m: 0.5e-6,
            pump_width_m: 15e-3,
            envelope_rms_s: 1e-12,
            s0_m: 0.1,
            s1_m: 0.45,
            s2_m: 0.35,
            s3_m: 1.0,
            mask1: MaskSpec::double_slit(200e-6, 10e-6, 0.0, 0.0),
            mask2: MaskSpec::double_slit(200e-6, 10e-6, 0.0, 0.0),
            phase_rad: 0.0,
            source_grid: GridSpec::new(37.5e-3, 26_787),
            mask_grid: GridSpec::with_spacing(1e-6, 500),
            detector_a_grid: GridSpec::new(8e-3, 513),
            detector_b_grid: GridSpec::with_spacing(10e-6, 5),
            herald_position_m: 0.0,
            herald_time_s: None,
            propagator: Propagator::Exact,
            wavelet: Wavelet::Cylindrical,
            validity_threshold: DEFAULT_VALIDITY_THRESHOLD,
        }
    }
}

impl Example1Config {
    /// Masks offset by `∓δ/2` so that their inner slits coincide (`2Δ = δ`).
    pub fn interleaved() -> Self {
        let base = Self::default();
        Self {
            mask1: MaskSpec::double_slit(200e-6, 10e-6, -100e-6, 0.0),
            mask2: MaskSpec::double_slit(200e-6, 10e-6, 100e-6, 0.0),
            ..base
        }
    }

    /// Unfolded ghost-imaging distance `L = 2 s0 + s1 + s2`.
    pub fn ghost_distance(&self) -> f64 {
        2.0 * self.s0_m + self.s1_m + self.s2_m
    }

    /// `τ = (s1 - s2 - s3)/c`: detection time of photon a minus that of b.
    pub fn tau(&self) -> f64 {
        (self.s1_m - self.s2_m - self.s3_m) / SPEED_OF_LIGHT
    }

    /// Far-field fringe period `λL/δ` of mask M1, if it is a double slit.
    pub fn nominal_period(&self) -> Option<f64> {
        match self.mask1 {
            MaskSpec::DoubleSlit { separation_m, .. } => Some(self.wavelength_m * self.ghost_distance() / separation_m),
            _ => None,
        }
    }

    pub fn geometry(&self) -> SceneGeometry {
        let d = self
            .mask1
            .extent()
            .into_iter()
            .chain(self.mask2.extent())
            .fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.max(e))))
            .unwrap_or(self.mask_grid.half_width_m + self.mask_grid.center_m.abs());
        SceneGeometry {
            s0: self.s0_m,
            s1: self.s1_m,
            s2: self.s2_m,
            s3: self.s3_m,
            s4: None,
            pump_width: self.pump_width_m,
            check_source_curvature: true,
            feature_size: Some(d),
            wavelengths: vec![self.wavelength_m],
        }
    }

    /// Sampling status of every diffraction kernel, without building them.
    pub fn sampling_plan(&self) -> Result<Vec<SamplingReport>> {
        self.validate()?;
        let lambda = Wavelength::new(self.wavelength_m)?;
        let src = self.source_grid.at(0.0)?;
        let z_mask = self.s0_m + self.s2_m;
        let mask = self.mask_grid.at(z_mask)?;
        [
            (src.clone(), self.detector_a_grid.at(self.s0_m + self.s1_m)?),
            (src, mask.clone()),
            (mask, self.detector_b_grid.at(z_mask + self.s3_m)?),
        ]
        .iter()
        .map(|(a, b)| diffraction_sampling(a, b, lambda, self.propagator))
        .collect()
    }

    pub fn validate(&self) -> Result<()> {
        Wavelength::new(self.wavelength_m)?;
        for (name, v) in [
            ("pump_width_m", self.pump_width_m),
            ("envelope_rms_s", self.envelope_rms_s),
            ("s0_m", self.s0_m),
            ("s1_m", self.s1_m),
            ("s2_m", self.s2_m),
            ("s3_m", self.s3_m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v:e}")));
            }
        }
        self.mask1.validate()?;
        self.mask2.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Example1Result {
    pub phase_rad: f64,
    pub grid: TransverseGrid,
    /// Unit-normalized conditional amplitude of photon a.
    pub amplitude: Vec<Complex64>,
    /// Conditional intensity of photon a.
    pub profile: Vec<f64>,
    /// `|M̃1 + e^{iφ} M̃2|²` on the same grid, for double-slit masks.
    pub oracle_profile: Option<Vec<f64>>,
    /// Scale-fitted relative L2 distance to the oracle over the central five
    /// fringes.
    pub oracle_l2: Option<f64>,
    pub tau_s: f64,
    /// Time offset of photon a from the herald, from the delay bookkeeping.
    pub herald_time_offset_s: f64,
    pub envelope_factor: Option<f64>,
    pub herald_probability_density: f64,
    pub nominal_period_m: Option<f64>,
    pub fringe_period_m: Option<f64>,
    pub visibility: f64,
    pub validity: ValidityReport,
    pub sampling: Vec<SamplingReport>,
    pub terms: usize,
    pub branches: usize,
    pub merged: usize,
}

/// Kernels of an Example 1 geometry, reusable across interferometric phases.
pub struct Example1Setup {
    config: Example1Config,
    source: CorrelatedSource,
    kernel_a: Kernel,
    arm1: Kernel,
    arm2: Kernel,
    validity: ValidityReport,
}

impl Example1Setup {
    pub fn build(config: &Example1Config) -> Result<Self> {
        config.validate()?;
        let c = config;
        let lambda = Wavelength::new(c.wavelength_m)?;
        let src_grid = c.source_grid.at(0.0)?;
        let profile = gaussian_transverse(&src_grid, c.pump_width_m)?;
        let source = CorrelatedSource::new(
            src_grid.clone(),
            vec![lambda; 2],
            profile,
            TemporalModel::simultaneous(2, c.envelope_rms_s, 0)?,
        )?;

        let kernel = |a: &TransverseGrid, b: &TransverseGrid| diffraction_kernel(a, b, lambda, c.propagator, c.wavelet);
        let da = c.detector_a_grid.at(c.s0_m + c.s1_m)?;
        let kernel_a = kernel(&src_grid, &da)?;

        let z_mask = c.s0_m + c.s2_m;
        let mask_grid = c.mask_grid.at(z_mask)?;
        let db = c.detector_b_grid.at(z_mask + c.s3_m)?;
        let to_mask = kernel(&src_grid, &mask_grid)?;
        let to_db = kernel(&mask_grid, &db)?;
        // mask·(mask → D_b) first keeps the intermediate at |D_b| rows
        let arm = |m: &MaskSpec| -> Result<Kernel> {
            compose(&to_mask, &compose(&mask_kernel(&mask_grid, m, lambda)?, &to_db)?)
        };
        let arm1 = arm(&c.mask1)?;
        let arm2 = arm(&c.mask2)?;

        Ok(Self {
            config: config.clone(),
            source,
            kernel_a,
            arm1,
            arm2,
            validity: check_validity(&c.geometry(), c.validity_threshold),
        })
    }

    pub fn config(&self) -> &Example1Config {
        &self.config
    }

    pub fn validity(&self) -> &ValidityReport {
        &self.validity
    }

    /// Path set of photon b: weights `-1/√2` through M1 and `+1/√2` through
    /// M2, with the interferometric phase `φ + π` on M2 so that `φ = 0`
    /// adds the two mask transforms.
    pub fn photon_b_paths(&self, phase: f64) -> Result<PathSet> {
        let w = FRAC_1_SQRT_2;
        PathSet::new(vec![
            (self.arm1.clone(), Complex64::new(-w, 0.0)),
            (self.arm2.clone(), Complex64::from_polar(w, phase + PI)),
        ])
    }

    pub fn run(&self, phase: f64) -> Result<Example1Result> {
        let c = &self.config;
        let prop = propagate_correlated(
            &self.source,
            &[PathSet::single(self.kernel_a.clone()), self.photon_b_paths(phase)?],
        )?;
        let (terms, branches, merged) = (prop.terms, prop.branches.len(), prop.merged());
        let joint = prop.into_single()?;
        let b_delay = (c.s0_m + c.s2_m + c.s3_m) / SPEED_OF_LIGHT;
        let heralded = herald(
            &joint,
            &HeraldEvent {
                photon: 1,
                position: c.herald_position_m,
                time: c.herald_time_s.unwrap_or(b_delay),
            },
        )?;
        let grid = joint.grid(0).clone();
        let profile = intensity_profile(&heralded.conditional, 0)?;
        let amplitude = heralded.conditional.tensor().iter().copied().collect();

        let nominal = c.nominal_period();
        let l2_window = nominal.map_or(0.9 * grid.half_width(), |p| 2.5 * p);
        let period_window = nominal.map_or(0.9 * grid.half_width(), |p| 3.0 * p);
        let fringe_period_m = fringe_period(&grid, &profile, period_window, 4);
        let vis = visibility(&grid, &profile, l2_window);

        let lambda = Wavelength::new(c.wavelength_m)?;
        let oracle_profile = match (&c.mask1, &c.mask2) {
            (MaskSpec::DoubleSlit { .. }, MaskSpec::DoubleSlit { .. }) => {
                let m2 = c.mask2.with_extra_phase(phase);
                Some(
                    grid.samples()
                        .map(|x| {
                            let a = fraunhofer_double_slit(&c.mask1, lambda, c.ghost_distance(), x)?;
                            let b = fraunhofer_double_slit(&m2, lambda, c.ghost_distance(), x)?;
                            Ok((a + b).norm_sqr())
                        })
                        .collect::<Result<Vec<f64>>>()?,
                )
            }
            _ => None,
        };
        let oracle_l2 = oracle_profile.as_ref().map(|o| {
            let (m, r): (Vec<f64>, Vec<f64>) = grid
                .samples()
                .zip(profile.iter().zip(o))
                .filter(|(x, _)| (x - grid.center()).abs() <= l2_window)
                .map(|(_, (p, q))| (*p, *q))
                .unzip();
            scale_fitted_l2(&m, &r)
        });

        let mut sampling = self.kernel_a.sampling().to_vec();
        sampling.extend(self.arm1.sampling().iter().cloned());
        Ok(Example1Result {
            phase_rad: phase,
            grid,
            amplitude,
            profile,
            oracle_profile,
            oracle_l2,
            tau_s: c.tau(),
            herald_time_offset_s: heralded.time_offsets[0].expect("photons share an envelope"),
            envelope_factor: heralded.envelope_factor,
            herald_probability_density: heralded.probability_density,
            nominal_period_m: nominal,
            fringe_period_m,
            visibility: vis,
            validity: self.validity.clone(),
            sampling,
            terms,
            branches,
            merged,
        })
    }
}

pub fn run_example1(config: &Example1Config) -> Result<Example1Result> {
    Example1Setup::build(config)?.run(config.phase_rad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub phase_rad: f64,
    pub fringe_period_m: Option<f64>,
    pub visibility: f64,
}

/// Runs the interferometer at each phase; the kernels are built once.
pub fn sweep_phase(config: &Example1Config, phases: &[f64]) -> Result<Vec<PhaseRow>> {
    let setup = Example1Setup::build(config)?;
    phases
        .par_iter()
        .map(|&phase| {
            let r = setup.run(phase)?;
            Ok(PhaseRow {
                phase_rad: phase,
                fringe_period_m: r.fringe_period_m,
                visibility: r.visibility,
            })
        })
        .collect()
}
