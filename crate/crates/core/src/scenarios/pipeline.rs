//! Free-form optical pipelines: a source, an element chain per photon and a
//! set of point detectors.

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::GridSpec;
use crate::amplitude::{CorrelatedSource, NPhotonAmplitude, NormConvention};
use crate::engine::{propagate, propagate_correlated, Propagation};
use crate::error::{Error, Result};
use crate::grid::{gaussian_transverse, TransverseGrid};
use crate::kernels::{
    compose, diffraction_kernel, lens_kernel, mask_kernel, Kernel, MaskSpec, PathSet, Propagator, SamplingReport,
    Wavelet,
};
use crate::measurement::{herald, intensity_profile, HeraldEvent};
use crate::temporal::TemporalModel;
use crate::units::Wavelength;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceSpec {
    /// Photon pair with perfectly correlated positions and a Gaussian pump
    /// profile of rms width `pump_width_m`.
    Biphoton {
        wavelengths_m: [f64; 2],
        pump_width_m: f64,
        envelope_rms_s: f64,
        grid: GridSpec,
    },
    /// Photon triplet, otherwise as `biphoton`.
    Triphoton {
        wavelengths_m: [f64; 3],
        pump_width_m: f64,
        envelope_rms_s: f64,
        grid: GridSpec,
    },
    /// Independent photons, each a unit-norm Gaussian of rms width
    /// `widths_m[i]` on `grids[i]`.
    Product {
        wavelengths_m: Vec<f64>,
        widths_m: Vec<f64>,
        envelope_rms_s: f64,
        grids: Vec<GridSpec>,
    },
    /// Explicit row-major tensor.
    CustomTensor {
        wavelengths_m: Vec<f64>,
        envelope_rms_s: f64,
        grids: Vec<GridSpec>,
        re: Vec<f64>,
        im: Vec<f64>,
    },
}

impl SourceSpec {
    pub fn photons(&self) -> usize {
        match self {
            Self::Biphoton { .. } => 2,
            Self::Triphoton { .. } => 3,
            Self::Product { wavelengths_m, .. } | Self::CustomTensor { wavelengths_m, .. } => wavelengths_m.len(),
        }
    }

    pub fn wavelengths(&self) -> Vec<f64> {
        match self {
            Self::Biphoton { wavelengths_m, .. } => wavelengths_m.to_vec(),
            Self::Triphoton { wavelengths_m, .. } => wavelengths_m.to_vec(),
            Self::Product { wavelengths_m, .. } | Self::CustomTensor { wavelengths_m, .. } => wavelengths_m.clone(),
        }
    }

    /// Source-plane grid of every photon.
    pub fn grids(&self) -> Result<Vec<TransverseGrid>> {
        match self {
            Self::Biphoton { grid, .. } => Ok(vec![grid.at(0.0)?; 2]),
            Self::Triphoton { grid, .. } => Ok(vec![grid.at(0.0)?; 3]),
            Self::Product { grids, .. } | Self::CustomTensor { grids, .. } => grids.iter().map(|g| g.at(0.0)).collect(),
        }
    }
}

enum BuiltSource {
    Correlated(CorrelatedSource),
    Tensor(NPhotonAmplitude),
}

fn build_source(spec: &SourceSpec) -> Result<BuiltSource> {
    let lambdas = spec
        .wavelengths()
        .into_iter()
        .map(Wavelength::new)
        .collect::<Result<Vec<_>>>()?;
    let n = lambdas.len();
    if n == 0 {
        return Err(Error::InvalidArgument("source has no photons".into()));
    }
    let grids = spec.grids()?;
    match spec {
        SourceSpec::Biphoton {
            pump_width_m,
            envelope_rms_s,
            ..
        }
        | SourceSpec::Triphoton {
            pump_width_m,
            envelope_rms_s,
            ..
        } => Ok(BuiltSource::Correlated(CorrelatedSource::new(
            grids[0].clone(),
            lambdas,
            gaussian_transverse(&grids[0], *pump_width_m)?,
            TemporalModel::simultaneous(n, *envelope_rms_s, 0)?,
        )?)),
        SourceSpec::Product {
            widths_m,
            envelope_rms_s,
            ..
        } => {
            if widths_m.len() != n || grids.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "product source with {n} wavelengths needs {n} widths and {n} grids"
                )));
            }
            let factors = grids
                .iter()
                .zip(&lambdas)
                .zip(widths_m)
                .map(|((g, l), w)| Ok((g.clone(), *l, gaussian_transverse(g, *w)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(BuiltSource::Tensor(NPhotonAmplitude::product(
                factors,
                TemporalModel::simultaneous(n, *envelope_rms_s, 0)?,
            )?))
        }
        SourceSpec::CustomTensor {
            envelope_rms_s, re, im, ..
        } => {
            if grids.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "custom tensor with {n} photons needs {n} grids"
                )));
            }
            let shape: Vec<usize> = grids.iter().map(TransverseGrid::len).collect();
            let len: usize = shape.iter().product();
            if re.len() != len || im.len() != len {
                return Err(Error::InvalidArgument(format!(
                    "custom tensor needs {len} entries in re and im, got {} and {}",
                    re.len(),
                    im.len()
                )));
            }
            let values = re.iter().zip(im).map(|(a, b)| Complex64::new(*a, *b)).collect();
            let tensor =
                ArrayD::from_shape_vec(IxDyn(&shape), values).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            Ok(BuiltSource::Tensor(NPhotonAmplitude::new(
                grids,
                lambdas,
                tensor,
                TemporalModel::simultaneous(n, *envelope_rms_s, 0)?,
                NormConvention::Unnormalized,
            )?))
        }
    }
}

/// One optical element acting on a single photon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "element", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Element {
    /// Free space to a plane `distance_m` further on, sampled by `grid`
    /// (same transverse sampling as the current plane when omitted).
    FreeSpace {
        distance_m: f64,
        #[serde(default)]
        grid: Option<GridSpec>,
    },
    Lens {
        f_m: f64,
    },
    Mask {
        mask: MaskSpec,
    },
    /// Coherent split into arms that recombine on a common plane.
    PathSplit {
        arms: Vec<Arm>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arm {
    #[serde(default = "one")]
    pub weight_re: f64,
    #[serde(default)]
    pub weight_im: f64,
    /// Optical path added on top of the element distances, e.g. a folded
    /// delay line.
    #[serde(default)]
    pub extra_length_m: f64,
    pub elements: Vec<Element>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorRole {
    Herald,
    Scan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub photon: usize,
    pub role: DetectorRole,
    #[serde(default)]
    pub position_m: f64,
    #[serde(default)]
    pub time_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "product", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Product {
    Profile { photon: usize },
    Coincidence { photons: [usize; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineScene {
    pub source: SourceSpec,
    /// Element chain of each photon, in source order.
    pub elements: Vec<Vec<Element>>,
    #[serde(default)]
    pub detectors: Vec<DetectorSpec>,
    /// Defaults to a profile for every scanned photon.
    #[serde(default)]
    pub products: Vec<Product>,
    #[serde(default)]
    pub propagator: Propagator,
    #[serde(default)]
    pub wavelet: Wavelet,
}

struct ChainBuilder<'a> {
    wavelength: Wavelength,
    scene: &'a PipelineScene,
}

impl ChainBuilder<'_> {
    /// Weighted kernels of every path through `elements`, starting on `input`.
    fn paths(&self, input: &TransverseGrid, elements: &[Element]) -> Result<Vec<(Kernel, Complex64)>> {
        let mut paths = vec![(Kernel::identity(input, self.wavelength), Complex64::new(1.0, 0.0))];
        for element in elements {
            let current = paths[0].0.output_grid().clone();
            match element {
                Element::PathSplit { arms } => {
                    if arms.is_empty() {
                        return Err(Error::InvalidArgument("path split without arms".into()));
                    }
                    let mut next = Vec::new();
                    for (k, w) in &paths {
                        for arm in arms {
                            let weight = Complex64::new(arm.weight_re, arm.weight_im);
                            for (ak, aw) in self.paths(&current, &arm.elements)? {
                                next.push((compose(k, &ak.delayed(arm.extra_length_m)?)?, w * weight * aw));
                            }
                        }
                    }
                    paths = next;
                }
                _ => {
                    let step = self.element(&current, element)?;
                    paths = paths
                        .into_iter()
                        .map(|(k, w)| Ok((compose(&k, &step)?, w)))
                        .collect::<Result<_>>()?;
                }
            }
        }
        Ok(paths)
    }

    fn element(&self, input: &TransverseGrid, element: &Element) -> Result<Kernel> {
        match element {
            Element::FreeSpace { distance_m, grid } => {
                let z = input.z() + distance_m;
                let output = match grid {
                    Some(spec) => spec.at(z)?,
                    None => input.at_z(z),
                };
                diffraction_kernel(
                    input,
                    &output,
                    self.wavelength,
                    self.scene.propagator,
                    self.scene.wavelet,
                )
            }
            Element::Lens { f_m } => lens_kernel(input, *f_m, self.wavelength),
            Element::Mask { mask } => mask_kernel(input, mask, self.wavelength),
            Element::PathSplit { .. } => unreachable!("handled by the caller"),
        }
    }
}

impl PipelineScene {
    pub fn photons(&self) -> usize {
        self.source.photons()
    }

    /// Checks indices and builds the path set of every photon.
    pub fn path_sets(&self) -> Result<Vec<PathSet>> {
        let n = self.photons();
        if self.elements.len() != n {
            return Err(Error::InvalidArgument(format!(
                "source has {n} photons but {} element chains are given",
                self.elements.len()
            )));
        }
        for d in &self.detectors {
            if d.photon >= n {
                return Err(Error::InvalidArgument(format!(
                    "detector refers to photon {} of {n}",
                    d.photon
                )));
            }
        }
        let heralded: Vec<usize> = self
            .detectors
            .iter()
            .filter(|d| d.role == DetectorRole::Herald)
            .map(|d| d.photon)
            .collect();
        if heralded.len() >= n && n > 0 {
            return Err(Error::InvalidArgument(
                "at least one photon must remain unheralded".into(),
            ));
        }
        for (i, p) in heralded.iter().enumerate() {
            if heralded[..i].contains(p) {
                return Err(Error::InvalidArgument(format!("photon {p} is heralded twice")));
            }
        }
        for p in &self.products {
            let photons: &[usize] = match p {
                Product::Profile { photon } => std::slice::from_ref(photon),
                Product::Coincidence { photons } => photons,
            };
            for q in photons {
                if *q >= n || heralded.contains(q) {
                    return Err(Error::InvalidArgument(format!(
                        "product refers to photon {q}, which is missing or heralded"
                    )));
                }
            }
            if let Product::Coincidence { photons: [a, b] } = p {
                if a == b {
                    return Err(Error::InvalidArgument(
                        "coincidence map needs two distinct photons".into(),
                    ));
                }
            }
        }
        let grids = self.source.grids()?;
        self.source
            .wavelengths()
            .into_iter()
            .zip(grids.iter().zip(&self.elements))
            .map(|(l, (g, chain))| {
                let builder = ChainBuilder {
                    wavelength: Wavelength::new(l)?,
                    scene: self,
                };
                PathSet::new(builder.paths(g, chain)?)
            })
            .collect()
    }

    pub fn products(&self) -> Vec<Product> {
        if !self.products.is_empty() {
            return self.products.clone();
        }
        let scans: Vec<Product> = self
            .detectors
            .iter()
            .filter(|d| d.role == DetectorRole::Scan)
            .map(|d| Product::Profile { photon: d.photon })
            .collect();
        if scans.is_empty() {
            let heralded: Vec<usize> = self.heralds().iter().map(|d| d.photon).collect();
            (0..self.photons())
                .filter(|p| !heralded.contains(p))
                .map(|photon| Product::Profile { photon })
                .collect()
        } else {
            scans
        }
    }

    fn heralds(&self) -> Vec<DetectorSpec> {
        self.detectors
            .iter()
            .copied()
            .filter(|d| d.role == DetectorRole::Herald)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileOutput {
    pub photon: usize,
    pub grid: TransverseGrid,
    pub intensity: Vec<f64>,
    /// Present when a single photon remains in a single temporal branch.
    pub phase_rad: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoincidenceOutput {
    pub photons: [usize; 2],
    pub grids: [TransverseGrid; 2],
    /// Row-major over `grids[0] × grids[1]`.
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchSummary {
    pub delays_s: Vec<f64>,
    pub norm: f64,
    pub herald_probability_density: Option<f64>,
    pub herald_time_offsets_s: Vec<Option<f64>>,
    pub envelope_factors: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineResult {
    pub input_norm: Option<f64>,
    pub profiles: Vec<ProfileOutput>,
    pub coincidences: Vec<CoincidenceOutput>,
    pub branches: Vec<BranchSummary>,
    pub terms: usize,
    pub merged: usize,
    pub sampling: Vec<SamplingReport>,
}

pub fn sampling_reports(sets: &[PathSet]) -> Vec<SamplingReport> {
    let mut out: Vec<SamplingReport> = Vec::new();
    for s in sets {
        for k in s.paths() {
            for r in k.sampling() {
                if !out.contains(r) {
                    out.push(r.clone());
                }
            }
        }
    }
    out
}

/// Heralded amplitude of one branch with the original photon index of each
/// remaining axis.
struct Detected {
    amplitude: NPhotonAmplitude,
    photons: Vec<usize>,
    /// Product of herald densities; `None` without heralds.
    weight: Option<f64>,
    summary: BranchSummary,
}

fn detect(amplitude: NPhotonAmplitude, heralds: &[DetectorSpec]) -> Result<Detected> {
    let delays_s = (0..amplitude.photons())
        .map(|i| amplitude.temporal().delay(i))
        .collect();
    let norm = amplitude.norm();
    let mut photons: Vec<usize> = (0..amplitude.photons()).collect();
    let mut amp = amplitude;
    let mut weight = None;
    let mut offsets = Vec::new();
    let mut envelopes = Vec::new();
    for d in heralds {
        let axis = photons
            .iter()
            .position(|p| *p == d.photon)
            .expect("validated herald photon");
        let time = d.time_s.unwrap_or(amp.temporal().delay(axis));
        let h = herald(
            &amp,
            &HeraldEvent {
                photon: axis,
                position: d.position_m,
                time,
            },
        )?;
        // the conditional is normalized, so the joint weight is the product
        weight = Some(weight.unwrap_or(1.0) * h.probability_density);
        offsets.extend(h.time_offsets.iter().copied());
        envelopes.push(h.envelope_factor);
        photons.remove(axis);
        amp = h.conditional;
    }
    Ok(Detected {
        amplitude: amp,
        photons,
        weight,
        summary: BranchSummary {
            delays_s,
            norm,
            herald_probability_density: weight,
            herald_time_offsets_s: offsets,
            envelope_factors: envelopes,
        },
    })
}

fn pair_density(amplitude: &NPhotonAmplitude, a: usize, b: usize) -> Vec<f64> {
    let t = amplitude.tensor();
    let (na, nb) = (t.shape()[a], t.shape()[b]);
    let others: f64 = amplitude
        .grids()
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != a && *i != b)
        .map(|(_, g)| g.spacing())
        .product();
    let mut out = vec![0.0; na * nb];
    for (idx, v) in t.indexed_iter() {
        out[idx[a] * nb + idx[b]] += v.norm_sqr() * others;
    }
    out
}

pub fn run_pipeline(scene: &PipelineScene) -> Result<PipelineResult> {
    let sets = scene.path_sets()?;
    let sampling = sampling_reports(&sets);
    let (prop, input_norm): (Propagation, Option<f64>) = match build_source(&scene.source)? {
        BuiltSource::Correlated(src) => (propagate_correlated(&src, &sets)?, None),
        BuiltSource::Tensor(amp) => (propagate(&amp, &sets)?, Some(amp.norm())),
    };
    let heralds = scene.heralds();
    let products = scene.products();
    let (terms, merged) = (prop.terms, prop.merged());
    let single_branch = prop.branches.len() == 1;
    let detected = prop
        .branches
        .into_iter()
        .map(|b| detect(b.amplitude, &heralds))
        .collect::<Result<Vec<_>>>()?;

    // distinguishable branches add incoherently
    let branch_weight = |d: &Detected| d.weight.unwrap_or(1.0);
    let total_weight: f64 = detected.iter().map(branch_weight).sum();
    let renormalize = !heralds.is_empty();

    let mut profiles = Vec::new();
    let mut coincidences = Vec::new();
    for p in products {
        match p {
            Product::Profile { photon } => {
                let first = &detected[0];
                let axis = first
                    .photons
                    .iter()
                    .position(|q| *q == photon)
                    .expect("validated photon");
                let grid = first.amplitude.grid(axis).clone();
                let mut intensity = vec![0.0; grid.len()];
                for d in &detected {
                    let w = if renormalize {
                        branch_weight(d) / total_weight
                    } else {
                        1.0
                    };
                    for (acc, v) in intensity.iter_mut().zip(intensity_profile(&d.amplitude, axis)?) {
                        *acc += w * v;
                    }
                }
                let phase_rad = (single_branch && first.photons.len() == 1)
                    .then(|| first.amplitude.tensor().iter().map(|c| c.arg()).collect());
                profiles.push(ProfileOutput {
                    photon,
                    grid,
                    intensity,
                    phase_rad,
                });
            }
            Product::Coincidence { photons: [a, b] } => {
                let first = &detected[0];
                let ia = first.photons.iter().position(|q| *q == a).expect("validated photon");
                let ib = first.photons.iter().position(|q| *q == b).expect("validated photon");
                let grids = [first.amplitude.grid(ia).clone(), first.amplitude.grid(ib).clone()];
                let mut density = vec![0.0; grids[0].len() * grids[1].len()];
                for d in &detected {
                    let w = if renormalize {
                        branch_weight(d) / total_weight
                    } else {
                        1.0
                    };
                    for (acc, v) in density.iter_mut().zip(pair_density(&d.amplitude, ia, ib)) {
                        *acc += w * v;
                    }
                }
                coincidences.push(CoincidenceOutput {
                    photons: [a, b],
                    grids,
                    density,
                });
            }
        }
    }

    Ok(PipelineResult {
        input_norm,
        profiles,
        coincidences,
        branches: detected.into_iter().map(|d| d.summary).collect(),
        terms,
        merged,
        sampling,
    })
}
