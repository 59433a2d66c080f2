//! Propagation of N-photon amplitudes: one kernel per tensor axis, summed
//! over the optical paths of every photon.

use ndarray::{ArrayD, Axis, IxDyn};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitude::{CorrelatedSource, NPhotonAmplitude};
use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelMatrix, PathSet};
use crate::temporal::TemporalModel;
use crate::units::SPEED_OF_LIGHT;

/// Maximum number of distinguishable temporal branches `propagate` keeps.
pub const MAX_TEMPORAL_BRANCHES: usize = 64;

/// Path terms whose delays agree within this fraction of the envelope rms
/// duration are added coherently.
pub const BRANCH_MERGE_TOLERANCE: f64 = 1e-3;

/// Contracts the tensor with `kernel` along axis `photon`.
pub fn apply_along_photon(amplitude: &NPhotonAmplitude, photon: usize, kernel: &Kernel) -> Result<NPhotonAmplitude> {
    check_kernel(amplitude.grids(), amplitude.wavelengths(), photon, kernel)?;
    let tensor = mode_product(amplitude.tensor(), photon, kernel.matrix());
    let mut grids = amplitude.grids().to_vec();
    grids[photon] = kernel.output_grid().clone();
    Ok(NPhotonAmplitude::from_parts_unchecked(
        grids,
        amplitude.wavelengths().to_vec(),
        tensor,
        amplitude.temporal().advanced(photon, kernel.path_length()),
    ))
}

fn check_kernel(
    grids: &[crate::grid::TransverseGrid],
    wavelengths: &[crate::units::Wavelength],
    photon: usize,
    kernel: &Kernel,
) -> Result<()> {
    if photon >= grids.len() {
        return Err(Error::InvalidArgument(format!(
            "photon index {photon} out of range for {} photons",
            grids.len()
        )));
    }
    if !kernel.input_grid().same_sampling(&grids[photon]) {
        return Err(Error::InvalidGeometry(format!(
            "kernel input grid {:?} does not match photon {photon} grid {:?}",
            kernel.input_grid(),
            grids[photon]
        )));
    }
    if kernel.wavelength() != wavelengths[photon] {
        return Err(Error::InvalidGeometry(format!(
            "kernel wavelength {:e} m differs from photon {photon} wavelength {:e} m",
            kernel.wavelength().meters(),
            wavelengths[photon].meters()
        )));
    }
    Ok(())
}

/// `out[.., i, ..] = Σ_j K[i, j] · t[.., j, ..]` along `axis`.
///
/// Every output entry is summed in a fixed order, so results do not depend
/// on the number of threads.
pub fn mode_product(tensor: &ArrayD<Complex64>, axis: usize, matrix: &KernelMatrix) -> ArrayD<Complex64> {
    let shape = tensor.shape().to_vec();
    let (rows, cols) = matrix.shape();
    assert_eq!(shape[axis], cols, "kernel/tensor dimension mismatch");
    if let KernelMatrix::Diagonal(d) = matrix {
        let mut out = tensor.clone();
        for (i, mut lane) in out.axis_iter_mut(Axis(axis)).enumerate() {
            lane.mapv_inplace(|c| c * d[i]);
        }
        return out;
    }
    let KernelMatrix::Dense(k) = matrix else { unreachable!() };
    let k = k.as_standard_layout();
    let k = k.as_slice().expect("standard layout");

    let pre: usize = shape[..axis].iter().product();
    let post: usize = shape[axis + 1..].iter().product();
    let src = tensor.as_standard_layout();
    let src = src.as_slice().expect("standard layout");
    let mut out_shape = shape.clone();
    out_shape[axis] = rows;
    let mut out = vec![Complex64::new(0.0, 0.0); pre * rows * post];

    // One output slab `[a, i, :]` per task.
    out.par_chunks_mut(post).enumerate().for_each(|(slab, dst)| {
        let (a, i) = (slab / rows, slab % rows);
        let krow = &k[i * cols..(i + 1) * cols];
        let base = a * cols * post;
        for (j, kij) in krow.iter().enumerate() {
            if kij.re == 0.0 && kij.im == 0.0 {
                continue;
            }
            let s = &src[base + j * post..base + (j + 1) * post];
            for (o, v) in dst.iter_mut().zip(s) {
                *o += kij * v;
            }
        }
    });
    ArrayD::from_shape_vec(IxDyn(&out_shape), out).expect("mode product shape")
}

/// One temporally distinguishable component of a propagated amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalBranch {
    pub amplitude: NPhotonAmplitude,
    /// For every photon, the indices of the paths summed into this branch.
    pub paths: Vec<Vec<usize>>,
}

/// Result of [`propagate`]: terms with distinguishable delay patterns are
/// kept apart, the rest are summed.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    pub branches: Vec<TemporalBranch>,
    /// Number of path combinations `∏ K_i`.
    pub terms: usize,
}

impl Propagation {
    /// Path combinations absorbed into another branch.
    pub fn merged(&self) -> usize {
        self.terms - self.branches.len()
    }

    pub fn single(&self) -> Result<&NPhotonAmplitude> {
        match self.branches.as_slice() {
            [b] => Ok(&b.amplitude),
            bs => Err(Error::MultipleBranches(bs.len())),
        }
    }

    pub fn into_single(mut self) -> Result<NPhotonAmplitude> {
        if self.branches.len() == 1 {
            Ok(self.branches.pop().expect("one branch").amplitude)
        } else {
            Err(Error::MultipleBranches(self.branches.len()))
        }
    }
}

/// Paths of one photon grouped by delay; kernels in a group are summed.
struct DelayGroup {
    kernel: Kernel,
    paths: Vec<usize>,
}

fn group_paths(set: &PathSet, tolerance: f64) -> Vec<DelayGroup> {
    let mut groups: Vec<DelayGroup> = Vec::new();
    for (k, kernel) in set.paths().iter().enumerate() {
        let delay = kernel.path_length() / SPEED_OF_LIGHT;
        match groups
            .iter_mut()
            .find(|g| (g.kernel.path_length() / SPEED_OF_LIGHT - delay).abs() <= tolerance)
        {
            Some(g) => {
                g.kernel = sum_kernels(&g.kernel, kernel);
                g.paths.push(k);
            }
            None => groups.push(DelayGroup {
                kernel: kernel.clone(),
                paths: vec![k],
            }),
        }
    }
    groups
}

fn sum_kernels(a: &Kernel, b: &Kernel) -> Kernel {
    let matrix = match (a.matrix(), b.matrix()) {
        (KernelMatrix::Diagonal(x), KernelMatrix::Diagonal(y)) => {
            KernelMatrix::Diagonal(x.iter().zip(y).map(|(p, q)| p + q).collect())
        }
        (x, y) => KernelMatrix::Dense(x.to_dense() + y.to_dense()),
    };
    a.with_matrix(matrix)
}

fn group_combinations(per_photon: &[PathSet], temporal: &TemporalModel) -> Result<(Vec<Vec<DelayGroup>>, usize)> {
    let tol = BRANCH_MERGE_TOLERANCE * temporal.envelope_rms();
    let groups: Vec<Vec<DelayGroup>> = per_photon.iter().map(|s| group_paths(s, tol)).collect();
    let branches = groups
        .iter()
        .map(Vec::len)
        .try_fold(1usize, |acc, n| acc.checked_mul(n));
    match branches {
        Some(n) if n <= MAX_TEMPORAL_BRANCHES => Ok((groups, n)),
        Some(n) => Err(Error::BranchExplosion(n)),
        None => Err(Error::BranchExplosion(usize::MAX)),
    }
}

/// Row-major enumeration of all group index combinations.
fn combinations(sizes: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = sizes.iter().product();
    (0..total)
        .map(|mut flat| {
            let mut idx = vec![0; sizes.len()];
            for (d, &n) in sizes.iter().enumerate().rev() {
                idx[d] = flat % n;
                flat /= n;
            }
            idx
        })
        .collect()
}

fn check_path_sets(photons: usize, per_photon: &[PathSet]) -> Result<()> {
    if per_photon.len() != photons {
        return Err(Error::InvalidArgument(format!(
            "{} path sets for {photons} photons",
            per_photon.len()
        )));
    }
    Ok(())
}

/// Coherent sum over all path combinations `(k_1, …, k_N)`.
pub fn propagate(amplitude: &NPhotonAmplitude, per_photon: &[PathSet]) -> Result<Propagation> {
    check_path_sets(amplitude.photons(), per_photon)?;
    for (i, set) in per_photon.iter().enumerate() {
        check_kernel(amplitude.grids(), amplitude.wavelengths(), i, &set.paths()[0])?;
    }
    let (groups, _) = group_combinations(per_photon, amplitude.temporal())?;
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let branches = combinations(&sizes)
        .into_iter()
        .map(|combo| {
            let mut amp = amplitude.clone();
            for (photon, &g) in combo.iter().enumerate() {
                amp = apply_along_photon(&amp, photon, &groups[photon][g].kernel)?;
            }
            Ok(TemporalBranch {
                amplitude: amp,
                paths: combo
                    .iter()
                    .enumerate()
                    .map(|(p, &g)| groups[p][g].paths.clone())
                    .collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Propagation {
        branches,
        terms: per_photon.iter().map(PathSet::len).product(),
    })
}

/// Propagates a position-correlated source without materializing its
/// `M^N` delta tensor:
/// `out[x_1..x_N] = Σ_ρ g(ρ) Δ^{1-N} ∏_j K_j[x_j, ρ]`.
pub fn propagate_correlated(source: &CorrelatedSource, per_photon: &[PathSet]) -> Result<Propagation> {
    let n = source.photons();
    check_path_sets(n, per_photon)?;
    let grids = vec![source.grid().clone(); n];
    for (i, set) in per_photon.iter().enumerate() {
        check_kernel(&grids, source.wavelengths(), i, &set.paths()[0])?;
    }
    let (groups, _) = group_combinations(per_photon, source.temporal())?;
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let weight = source.grid().spacing().powi(1 - n as i32);
    let weighted: Vec<Complex64> = source.profile().iter().map(|g| g * weight).collect();

    let branches = combinations(&sizes)
        .into_iter()
        .map(|combo| {
            let kernels: Vec<&Kernel> = combo.iter().enumerate().map(|(p, &g)| &groups[p][g].kernel).collect();
            let tensor = contract_correlated(&weighted, &kernels);
            let delays: Vec<f64> = kernels.iter().map(|k| k.path_length() / SPEED_OF_LIGHT).collect();
            let amp = NPhotonAmplitude::from_parts_unchecked(
                kernels.iter().map(|k| k.output_grid().clone()).collect(),
                source.wavelengths().to_vec(),
                tensor,
                source.temporal().advanced_by_delays(&delays),
            );
            TemporalBranch {
                amplitude: amp,
                paths: combo
                    .iter()
                    .enumerate()
                    .map(|(p, &g)| groups[p][g].paths.clone())
                    .collect(),
            }
        })
        .collect();
    Ok(Propagation {
        branches,
        terms: per_photon.iter().map(PathSet::len).product(),
    })
}

enum Rows<'a> {
    Dense(&'a [Complex64], usize),
    Diagonal(&'a [Complex64]),
}

impl Rows<'_> {
    fn scale(&self, x: usize, v: &mut [Complex64]) {
        match self {
            Rows::Dense(m, cols) => {
                for (vi, k) in v.iter_mut().zip(&m[x * cols..(x + 1) * cols]) {
                    *vi *= k;
                }
            }
            Rows::Diagonal(d) => {
                let keep = v[x] * d[x];
                v.fill(Complex64::new(0.0, 0.0));
                v[x] = keep;
            }
        }
    }

    fn dot(&self, x: usize, v: &[Complex64]) -> Complex64 {
        match self {
            Rows::Dense(m, cols) => m[x * cols..(x + 1) * cols]
                .iter()
                .zip(v)
                .fold(Complex64::new(0.0, 0.0), |acc, (k, y)| acc + k * y),
            Rows::Diagonal(d) => d[x] * v[x],
        }
    }
}

fn contract_correlated(weighted: &[Complex64], kernels: &[&Kernel]) -> ArrayD<Complex64> {
    let dense: Vec<Option<ndarray::Array2<Complex64>>> = kernels
        .iter()
        .map(|k| match k.matrix() {
            KernelMatrix::Dense(m) => Some(m.as_standard_layout().into_owned()),
            KernelMatrix::Diagonal(_) => None,
        })
        .collect();
    let rows: Vec<Rows> = kernels
        .iter()
        .zip(&dense)
        .map(|(k, d)| match (k.matrix(), d) {
            (KernelMatrix::Diagonal(v), _) => Rows::Diagonal(v),
            (_, Some(m)) => Rows::Dense(m.as_slice().expect("standard layout"), m.ncols()),
            _ => unreachable!(),
        })
        .collect();
    let shape: Vec<usize> = kernels.iter().map(|k| k.output_grid().len()).collect();
    let (last, outer) = rows.split_last().expect("at least one photon");
    let outer_shape = &shape[..shape.len() - 1];
    let m_last = shape[shape.len() - 1];
    let mut out = vec![Complex64::new(0.0, 0.0); shape.iter().product()];

    out.par_chunks_mut(m_last).enumerate().for_each(|(mut flat, dst)| {
        let mut idx = vec![0; outer_shape.len()];
        for (d, &n) in outer_shape.iter().enumerate().rev() {
            idx[d] = flat % n;
            flat /= n;
        }
        let mut v = weighted.to_vec();
        for (r, &x) in outer.iter().zip(&idx) {
            r.scale(x, &mut v);
        }
        for (x, o) in dst.iter_mut().enumerate() {
            *o = last.dot(x, &v);
        }
    });
    ArrayD::from_shape_vec(IxDyn(&shape), out).expect("output shape")
}

/// Far-field and source-curvature ratios for a scene; all should be ≪ 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub far_field_ratios: Vec<(String, f64)>,
    /// `None` when the geometry does not rely on the flat-source approximation.
    pub curvature_ratio: Option<f64>,
    pub pass_threshold: f64,
    pub warnings: Vec<String>,
}

impl ValidityReport {
    pub fn passed(&self) -> bool {
        self.warnings.is_empty()
    }

    pub fn max_ratio(&self) -> f64 {
        self.far_field_ratios
            .iter()
            .map(|r| r.1)
            .fold(self.curvature_ratio.unwrap_or(0.0), f64::max)
    }
}

pub const DEFAULT_VALIDITY_THRESHOLD: f64 = 0.1;

/// Distances of the two-arm layout: common path `s0`, arm segments `s1`,
/// `s2`, detector distance `s3` behind the masks and an optional `s4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGeometry {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub s4: Option<f64>,
    /// Transverse rms width `S` of the pump.
    pub pump_width: f64,
    /// Whether the source-curvature condition applies. Imaging layouts do
    /// not rely on it.
    pub check_source_curvature: bool,
    /// Largest transverse extent `d` of the diffracting structure; without
    /// one no far-field ratios are computed.
    pub feature_size: Option<f64>,
    pub wavelengths: Vec<f64>,
}

/// Far-field ratios `d²/(λ s3)` and `d²/(λ (s0+s2))` at the shortest
/// wavelength, curvature ratio `λ (s0 + min(s1, s2)) / 4S²` at the longest.
pub fn check_validity(geometry: &SceneGeometry, threshold: f64) -> ValidityReport {
    let g = geometry;
    let mut warnings = Vec::new();
    let mut lengths = vec![
        ("s0", g.s0),
        ("s1", g.s1),
        ("s2", g.s2),
        ("s3", g.s3),
        ("S", g.pump_width),
    ];
    lengths.extend(g.s4.map(|v| ("s4", v)));
    for (name, v) in lengths {
        if !(v > 0.0) {
            warnings.push(format!("{name} = {v:e} m is not positive"));
        }
    }
    if g.wavelengths.is_empty() || g.wavelengths.iter().any(|l| !(*l > 0.0)) {
        warnings.push("wavelength list is empty or non-positive".into());
    }
    let lmin = g.wavelengths.iter().copied().fold(f64::INFINITY, f64::min);
    let lmax = g.wavelengths.iter().copied().fold(0.0, f64::max);
    let far_field_ratios = match g.feature_size {
        Some(d) => vec![
            ("d^2/(lambda*s3)".to_string(), (d * d / (lmin * g.s3)).abs()),
            (
                "d^2/(lambda*(s0+s2))".to_string(),
                (d * d / (lmin * (g.s0 + g.s2))).abs(),
            ),
        ],
        None => Vec::new(),
    };
    let curvature_ratio = g
        .check_source_curvature
        .then(|| (lmax * (g.s0 + g.s1.min(g.s2)) / (4.0 * g.pump_width * g.pump_width)).abs());
    for (name, r) in &far_field_ratios {
        if !(*r <= threshold) {
            warnings.push(format!("far-field ratio {name} = {r:.4} exceeds {threshold}"));
        }
    }
    if let Some(curvature_ratio) = curvature_ratio.filter(|r| !(*r <= threshold)) {
        warnings.push(format!(
            "curvature ratio lambda*(s0+min(s1,s2))/4S^2 = {curvature_ratio:.4} exceeds {threshold}"
        ));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    ValidityReport {
        far_field_ratios,
        curvature_ratio,
        pass_threshold: threshold,
        warnings,
    }
}
