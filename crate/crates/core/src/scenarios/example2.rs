//! Triphoton imaging. Two photons of wavelength λ1 (indices 0 and 1) cross
//! `s0 + s1` of free space, a thin lens `f1` and `s2` to the imaging
//! detector D_a. The λ2 photon (index 2) crosses `s0 + s3`, an optional
//! lens `f2` and `s4` to the herald detector D_b.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::analysis::{quadratic_coefficient, unwrap_phase};
use super::GridSpec;
use crate::amplitude::{CorrelatedSource, NPhotonAmplitude};
use crate::engine::{check_validity, propagate_correlated, SceneGeometry, ValidityReport, DEFAULT_VALIDITY_THRESHOLD};
use crate::error::{Error, Result};
use crate::grid::{gaussian_transverse, TransverseGrid};
use crate::kernels::{
    compose, diffraction_kernel, diffraction_sampling, lens_kernel, PathSet, Propagator, SamplingReport, Wavelet,
};
use crate::measurement::{herald, moments, HeraldEvent};
use crate::oracles::{imaging_params, solve_flatness_f2, LensFlatnessSolution};
use crate::temporal::TemporalModel;
use crate::units::{Wavelength, SPEED_OF_LIGHT};

/// Lens in the herald arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HeraldLens {
    #[default]
    None,
    /// Focal length from the flatness condition.
    Solved,
    Focal {
        f_m: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example2Config {
    pub lambda1_m: f64,
    pub lambda2_m: f64,
    pub pump_width_m: f64,
    pub envelope_rms_s: f64,
    pub s0_m: f64,
    pub s1_m: f64,
    pub s2_m: f64,
    pub s3_m: f64,
    pub s4_m: f64,
    /// Imaging lens; must satisfy the conjugate equation when given.
    #[serde(default)]
    pub f1_m: Option<f64>,
    #[serde(default)]
    pub herald_lens: HeraldLens,
    pub source_grid: GridSpec,
    pub imaging_lens_grid: GridSpec,
    pub herald_lens_grid: GridSpec,
    /// Defaults to 81 samples over `±4 S M`.
    #[serde(default)]
    pub detector_a_grid: Option<GridSpec>,
    pub detector_b_grid: GridSpec,
    #[serde(default)]
    pub herald_position_m: f64,
    #[serde(default)]
    pub herald_time_s: Option<f64>,
    #[serde(default = "paraxial")]
    pub propagator: Propagator,
    #[serde(default)]
    pub wavelet: Wavelet,
    #[serde(default = "default_threshold")]
    pub validity_threshold: f64,
}

fn paraxial() -> Propagator {
    Propagator::Paraxial
}

fn default_threshold() -> f64 {
    DEFAULT_VALIDITY_THRESHOLD
}

impl Default for Example2Config {
    /// Magnification 2 with `f1 = 0.2 m`.
    fn default() -> Self {
        Self {
            lambda1_m: 0.8e-6,
            lambda2_m: 0.5e-6,
            pump_width_m: 0.2e-3,
            envelope_rms_s: 1e-12,
            s0_m: 0.1,
            s1_m: 0.2,
            s2_m: 0.6,
            s3_m: 0.2,
            s4_m: 0.3,
            f1_m: None,
            herald_lens: HeraldLens::None,
            source_grid: GridSpec::new(1e-3, 1334),
            imaging_lens_grid: GridSpec::new(20e-3, 8001),
            herald_lens_grid: GridSpec::new(10e-3, 4001),
            detector_a_grid: None,
            detector_b_grid: GridSpec::with_spacing(5e-6, 5),
            herald_position_m: 0.0,
            herald_time_s: None,
            propagator: Propagator::Paraxial,
            wavelet: Wavelet::Cylindrical,
            validity_threshold: DEFAULT_VALIDITY_THRESHOLD,
        }
    }
}

impl Example2Config {
    /// Demagnifying variant, `M = 0.5` with the same `f1 = 0.2 m`.
    pub fn demagnifying() -> Self {
        Self {
            s1_m: 0.5,
            s2_m: 0.3,
            ..Self::default()
        }
    }

    pub fn magnification(&self) -> Result<f64> {
        Ok(imaging_params(self.s0_m, self.s1_m, self.s2_m)?.magnification)
    }

    pub fn detector_a(&self) -> Result<GridSpec> {
        let m = self.magnification()?;
        Ok(self
            .detector_a_grid
            .unwrap_or(GridSpec::new(4.0 * self.pump_width_m * m.abs(), 81)))
    }

    pub fn flatness(&self) -> Result<LensFlatnessSolution> {
        solve_flatness_f2(
            Wavelength::new(self.lambda1_m)?,
            Wavelength::new(self.lambda2_m)?,
            self.magnification()?,
            self.s0_m,
            self.s2_m,
            self.s3_m,
            self.s4_m,
        )
    }

    pub fn geometry(&self) -> SceneGeometry {
        SceneGeometry {
            s0: self.s0_m,
            s1: self.s1_m,
            s2: self.s2_m,
            s3: self.s3_m,
            s4: Some(self.s4_m),
            pump_width: self.pump_width_m,
            check_source_curvature: false,
            feature_size: None,
            wavelengths: vec![self.lambda1_m, self.lambda2_m],
        }
    }

    /// Focal length of the herald-arm lens, if any.
    pub fn herald_focal_length(&self) -> Result<Option<f64>> {
        match self.herald_lens {
            HeraldLens::None => Ok(None),
            HeraldLens::Focal { f_m } => Ok(Some(f_m)),
            HeraldLens::Solved => match self.flatness() {
                Ok(sol) if sol.feasible => Ok(Some(sol.f2)),
                _ => Err(Error::NoSolution(
                    "flatness condition has no feasible f2 for this geometry".into(),
                )),
            },
        }
    }

    /// Sampling status of every diffraction kernel, without building them.
    pub fn sampling_plan(&self) -> Result<Vec<SamplingReport>> {
        self.validate()?;
        let (l1, l2) = (Wavelength::new(self.lambda1_m)?, Wavelength::new(self.lambda2_m)?);
        let src = self.source_grid.at(0.0)?;
        let z_lens = self.s0_m + self.s1_m;
        let lens = self.imaging_lens_grid.at(z_lens)?;
        let da = self.detector_a()?.at(z_lens + self.s2_m)?;
        let db = self.detector_b_grid.at(self.s0_m + self.s3_m + self.s4_m)?;
        let mut steps = vec![(src.clone(), lens.clone(), l1), (lens, da, l1)];
        if self.herald_focal_length()?.is_some() {
            let eta = self.herald_lens_grid.at(self.s0_m + self.s3_m)?;
            steps.push((src, eta.clone(), l2));
            steps.push((eta, db, l2));
        } else {
            steps.push((src, db, l2));
        }
        steps
            .iter()
            .map(|(a, b, l)| diffraction_sampling(a, b, *l, self.propagator))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        Wavelength::new(self.lambda1_m)?;
        Wavelength::new(self.lambda2_m)?;
        for (name, v) in [
            ("pump_width_m", self.pump_width_m),
            ("envelope_rms_s", self.envelope_rms_s),
            ("s0_m", self.s0_m),
            ("s1_m", self.s1_m),
            ("s2_m", self.s2_m),
            ("s3_m", self.s3_m),
            ("s4_m", self.s4_m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v:e}")));
            }
        }
        let f = imaging_params(self.s0_m, self.s1_m, self.s2_m)?.focal_length;
        if let Some(f1) = self.f1_m {
            if ((f1 - f) / f).abs() > 1e-9 {
                return Err(Error::InvalidGeometry(format!(
                    "f1 = {f1} m does not image the source onto D_a (expected {f} m)"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Example2Result {
    pub magnification: f64,
    pub f1_m: f64,
    /// Herald-arm lens actually used.
    pub f2_m: Option<f64>,
    pub flatness: Option<LensFlatnessSolution>,
    pub grid: TransverseGrid,
    /// Unit-normalized conditional amplitude of the two λ1 photons.
    #[serde(skip)]
    pub conditional: NPhotonAmplitude,
    /// Fraction of `|a|²` within two grid cells of the diagonal.
    pub diagonal_support: f64,
    /// `|a(x, x)|²` over the D_a grid.
    pub diagonal_profile: Vec<f64>,
    pub diagonal_phase_rad: Vec<f64>,
    pub imaged_rms_m: f64,
    pub expected_rms_m: f64,
    /// Quadratic coefficient of the unwrapped diagonal phase within
    /// `±2 S M`, rad/m².
    pub phase_curvature: Option<f64>,
    /// `max |a(x, x') - a(x', x)| / max |a|`.
    pub exchange_asymmetry: f64,
    pub herald_probability_density: f64,
    pub herald_time_offsets_s: Vec<Option<f64>>,
    pub envelope_factor: Option<f64>,
    pub validity: ValidityReport,
    pub sampling: Vec<SamplingReport>,
    pub terms: usize,
    pub branches: usize,
}

pub fn run_example2(config: &Example2Config) -> Result<Example2Result> {
    config.validate()?;
    let c = config;
    let (l1, l2) = (Wavelength::new(c.lambda1_m)?, Wavelength::new(c.lambda2_m)?);
    let imaging = imaging_params(c.s0_m, c.s1_m, c.s2_m)?;
    let m = imaging.magnification;
    let flatness = c.flatness().ok();
    let f2 = c.herald_focal_length()?;

    let src = c.source_grid.at(0.0)?;
    let kernel =
        |a: &TransverseGrid, b: &TransverseGrid, l: Wavelength| diffraction_kernel(a, b, l, c.propagator, c.wavelet);

    let z_lens = c.s0_m + c.s1_m;
    let lens_grid = c.imaging_lens_grid.at(z_lens)?;
    let da = c.detector_a()?.at(z_lens + c.s2_m)?;
    let imaging_kernel = compose(
        &kernel(&src, &lens_grid, l1)?,
        &compose(
            &lens_kernel(&lens_grid, imaging.focal_length, l1)?,
            &kernel(&lens_grid, &da, l1)?,
        )?,
    )?;

    let db = c.detector_b_grid.at(c.s0_m + c.s3_m + c.s4_m)?;
    let herald_kernel = match f2 {
        None => kernel(&src, &db, l2)?,
        Some(f) => {
            let eta = c.herald_lens_grid.at(c.s0_m + c.s3_m)?;
            compose(
                &kernel(&src, &eta, l2)?,
                &compose(&lens_kernel(&eta, f, l2)?, &kernel(&eta, &db, l2)?)?,
            )?
        }
    };

    let source = CorrelatedSource::new(
        src.clone(),
        vec![l1, l1, l2],
        gaussian_transverse(&src, c.pump_width_m)?,
        TemporalModel::simultaneous(3, c.envelope_rms_s, 0)?,
    )?;
    let prop = propagate_correlated(
        &source,
        &[
            PathSet::single(imaging_kernel.clone()),
            PathSet::single(imaging_kernel.clone()),
            PathSet::single(herald_kernel.clone()),
        ],
    )?;
    let (terms, branches) = (prop.terms, prop.branches.len());
    let joint = prop.into_single()?;
    let herald_delay = herald_kernel.path_length() / SPEED_OF_LIGHT;
    let heralded = herald(
        &joint,
        &HeraldEvent {
            photon: 2,
            position: c.herald_position_m,
            time: c.herald_time_s.unwrap_or(herald_delay),
        },
    )?;
    let a = heralded.conditional.tensor();
    let n = da.len();

    let mut near = 0.0;
    let mut total = 0.0;
    let mut asym: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = a[[i, j]];
            let p = v.norm_sqr();
            total += p;
            if i.abs_diff(j) <= 2 {
                near += p;
            }
            asym = asym.max((v - a[[j, i]]).norm());
            peak = peak.max(v.norm());
        }
    }
    let diag: Vec<Complex64> = (0..n).map(|i| a[[i, i]]).collect();
    let diagonal_profile: Vec<f64> = diag.iter().map(|v| v.norm_sqr()).collect();
    let diagonal_phase_rad: Vec<f64> = diag.iter().map(|v| v.arg()).collect();
    let (_, imaged_rms_m) = moments(&da, &diagonal_profile);

    let window = 2.0 * c.pump_width_m * m.abs();
    let (xs, ph): (Vec<f64>, Vec<f64>) = da
        .samples()
        .zip(&diagonal_phase_rad)
        .filter(|(x, _)| (x - da.center()).abs() <= window)
        .map(|(x, p)| (x, *p))
        .unzip();
    let phase_curvature = quadratic_coefficient(&xs, &unwrap_phase(&ph));

    let mut sampling = imaging_kernel.sampling().to_vec();
    sampling.extend(herald_kernel.sampling().iter().cloned());
    Ok(Example2Result {
        magnification: m,
        f1_m: imaging.focal_length,
        f2_m: f2,
        flatness,
        grid: da,
        conditional: heralded.conditional.clone(),
        diagonal_support: near / total,
        diagonal_profile,
        diagonal_phase_rad,
        imaged_rms_m,
        expected_rms_m: c.pump_width_m * m.abs(),
        phase_curvature,
        exchange_asymmetry: asym / peak,
        herald_probability_density: heralded.probability_density,
        herald_time_offsets_s: heralded.time_offsets,
        envelope_factor: heralded.envelope_factor,
        validity: check_validity(&c.geometry(), c.validity_threshold),
        sampling,
        terms,
        branches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(base: Example2Config) -> Example2Config {
        Example2Config {
            source_grid: GridSpec::new(1e-3, 801),
            imaging_lens_grid: GridSpec::new(10e-3, 3001),
            herald_lens_grid: GridSpec::new(5e-3, 1001),
            ..base
        }
    }

    #[test]
    fn default_imaging_geometry() {
        let c = Example2Config::default();
        assert!((c.magnification().unwrap() - 2.0).abs() < 1e-15);
        assert!((Example2Config::demagnifying().magnification().unwrap() - 0.5).abs() < 1e-15);
        let d = c.detector_a().unwrap();
        assert!((d.half_width_m - 1.6e-3).abs() < 1e-15);
        let sol = c.flatness().unwrap();
        assert!(sol.feasible && sol.residual < 1e-9);
    }

    #[test]
    fn inconsistent_f1_is_rejected() {
        let c = Example2Config {
            f1_m: Some(0.25),
            ..small(Example2Config::default())
        };
        assert!(matches!(run_example2(&c), Err(Error::InvalidGeometry(_))));
        let ok = Example2Config {
            f1_m: Some(0.2),
            ..small(Example2Config::default())
        };
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn conditional_pair_is_bunched_and_symmetric() {
        let r = run_example2(&small(Example2Config::default())).unwrap();
        assert!(r.exchange_asymmetry < 1e-12);
        assert!(r.diagonal_support > 0.9, "{}", r.diagonal_support);
        assert!((r.imaged_rms_m / r.expected_rms_m - 1.0).abs() < 0.05);
        assert_eq!(r.conditional.photons(), 2);
        assert!((r.conditional.norm() - 1.0).abs() < 1e-12);
        assert_eq!(r.herald_time_offsets_s.len(), 2);
        assert!(r.validity.far_field_ratios.is_empty());
    }

    #[test]
    fn herald_lens_flattens_phase() {
        let base = small(Example2Config::default());
        let plain = run_example2(&base).unwrap();
        let flat = run_example2(&Example2Config {
            herald_lens: HeraldLens::Solved,
            ..base
        })
        .unwrap();
        let (a, b) = (plain.phase_curvature.unwrap(), flat.phase_curvature.unwrap());
        assert!(a.abs() > 10.0 * b.abs(), "{a} vs {b}");
        assert_eq!(flat.f2_m, Some(flat.flatness.unwrap().f2));
    }
}
