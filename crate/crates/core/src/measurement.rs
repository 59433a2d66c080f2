//! Point detection: coincidence densities, marginal intensities and heralded
//! projections of N-photon amplitudes.

use ndarray::Axis;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitude::NPhotonAmplitude;
use crate::error::{Error, Result};
use crate::grid::TransverseGrid;

/// Detection of photon `photon` at transverse position `position` (nearest
/// grid sample) and time `time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeraldEvent {
    pub photon: usize,
    pub position: f64,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeraldedState {
    /// Unit-normalized amplitude of the remaining photons, in their
    /// original order.
    pub conditional: NPhotonAmplitude,
    /// `Σ |slice|² ∏ Δξ_other`, a density per unit length of detector
    /// position.
    pub probability_density: f64,
    /// Expected detection time of each remaining photon minus the herald
    /// time, `None` for photons not time-correlated with the herald.
    pub time_offsets: Vec<Option<f64>>,
    /// Source envelope seen by the heralding photon at the detection time.
    pub envelope_factor: Option<f64>,
    /// Grid sample the detector position snapped to.
    pub sample_index: usize,
    pub sample_position: f64,
}

/// `|a(x_1, …, x_N)|²` at the nearest samples.
pub fn coincidence_density(amplitude: &NPhotonAmplitude, positions: &[f64]) -> Result<f64> {
    Ok(amplitude.value_at(positions)?.norm_sqr())
}

/// Projects the amplitude on a point detection of one photon.
pub fn herald(amplitude: &NPhotonAmplitude, event: &HeraldEvent) -> Result<HeraldedState> {
    let n = amplitude.photons();
    if n < 2 {
        return Err(Error::InvalidArgument("heralding needs at least two photons".into()));
    }
    if event.photon >= n {
        return Err(Error::InvalidArgument(format!(
            "herald photon {} out of range for {n} photons",
            event.photon
        )));
    }
    let grid = amplitude.grid(event.photon);
    let index = grid.nearest(event.position)?;
    let slice = amplitude.tensor().index_axis(Axis(event.photon), index).to_owned();

    let other_measure: f64 = amplitude
        .grids()
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != event.photon)
        .map(|(_, g)| g.spacing())
        .product();
    let slice_energy: f64 = slice.iter().map(|c| c.norm_sqr()).sum();
    let total_energy: f64 = amplitude.tensor().iter().map(|c| c.norm_sqr()).sum();
    if !(slice_energy > f64::EPSILON * f64::EPSILON * total_energy) {
        return Err(Error::HeraldImpossible);
    }

    let mut grids = amplitude.grids().to_vec();
    grids.remove(event.photon);
    let mut wavelengths = amplitude.wavelengths().to_vec();
    wavelengths.remove(event.photon);
    let temporal = amplitude.temporal();
    let time_offsets = (0..n)
        .filter(|&j| j != event.photon)
        .map(|j| temporal.offset(j, event.photon))
        .collect();
    let remaining = temporal.without_photon(event.photon).expect("at least two photons");
    let conditional =
        NPhotonAmplitude::from_parts_unchecked(grids, wavelengths, slice.into_dyn(), remaining).normalized()?;

    Ok(HeraldedState {
        conditional,
        probability_density: slice_energy * other_measure,
        time_offsets,
        envelope_factor: temporal.envelope(event.photon, event.time),
        sample_index: index,
        sample_position: grid.coord(index),
    })
}

/// Marginal `Σ_{others} |a|² ∏ Δξ_other` over the grid of `photon`.
pub fn intensity_profile(amplitude: &NPhotonAmplitude, photon: usize) -> Result<Vec<f64>> {
    if photon >= amplitude.photons() {
        return Err(Error::InvalidArgument(format!(
            "photon index {photon} out of range for {} photons",
            amplitude.photons()
        )));
    }
    let measure = amplitude.cell_measure() / amplitude.grid(photon).spacing();
    let tensor = amplitude.tensor();
    Ok((0..tensor.shape()[photon])
        .into_par_iter()
        .map(|i| {
            tensor
                .index_axis(Axis(photon), i)
                .iter()
                .map(|c| c.norm_sqr())
                .sum::<f64>()
                * measure
        })
        .collect())
}

/// Herald probability density for every detector position on the grid of
/// `photon`; identical to its marginal intensity.
pub fn herald_density_scan(amplitude: &NPhotonAmplitude, photon: usize) -> Result<Vec<f64>> {
    intensity_profile(amplitude, photon)
}

/// Centroid and rms width of a sampled non-negative profile.
pub fn moments(grid: &TransverseGrid, profile: &[f64]) -> (f64, f64) {
    let total: f64 = profile.iter().sum();
    let mean = grid.samples().zip(profile).map(|(x, p)| x * p).sum::<f64>() / total;
    let var = grid
        .samples()
        .zip(profile)
        .map(|(x, p)| (x - mean) * (x - mean) * p)
        .sum::<f64>()
        / total;
    (mean, var.sqrt())
}

pub fn rms_width(grid: &TransverseGrid, profile: &[f64]) -> f64 {
    moments(grid, profile).1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitude::NormConvention;
    use crate::grid::{gaussian_transverse, vector_norm};
    use crate::temporal::{TemporalModel, TimeOffset};
    use crate::units::{Wavelength, SPEED_OF_LIGHT};
    use ndarray::{ArrayD, IxDyn};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lam() -> Wavelength {
        Wavelength::new(0.5e-6).unwrap()
    }

    fn grid(n: usize) -> TransverseGrid {
        TransverseGrid::new(0.0, 0.0, 1e-4, n).unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn product(u: &[Complex64], v: &[Complex64], gu: &TransverseGrid, gv: &TransverseGrid) -> NPhotonAmplitude {
        NPhotonAmplitude::product(
            vec![(gu.clone(), lam(), u.to_vec()), (gv.clone(), lam(), v.to_vec())],
            TemporalModel::simultaneous(2, 1e-12, 0).unwrap(),
        )
        .unwrap()
    }

    fn tensor_amplitude(grids: Vec<TransverseGrid>, tensor: ArrayD<Complex64>) -> NPhotonAmplitude {
        let n = grids.len();
        NPhotonAmplitude::new(
            grids,
            vec![lam(); n],
            tensor,
            TemporalModel::simultaneous(n, 1e-12, 0).unwrap(),
            NormConvention::Unnormalized,
        )
        .unwrap()
    }

    #[test]
    fn product_state_coincidences_factorize() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (gu, gv) = (grid(11), grid(9));
        let (u, v) = (random_vec(&mut rng, 11), random_vec(&mut rng, 9));
        let a = product(&u, &v, &gu, &gv);
        for (i, j) in [(0, 0), (3, 7), (10, 8)] {
            let c = coincidence_density(&a, &[gu.coord(i), gv.coord(j)]).unwrap();
            let expected = u[i].norm_sqr() * v[j].norm_sqr();
            assert!((c - expected).abs() <= 1e-15 * expected);
            assert!(c >= 0.0);
        }
        assert!(matches!(
            coincidence_density(&a, &[0.0, 1.0]),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn coincidences_ignore_global_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = grid(8);
        let a = product(&random_vec(&mut rng, 8), &random_vec(&mut rng, 8), &g, &g);
        let b = a.scaled(Complex64::from_polar(1.0, 1.234));
        for x in g.samples() {
            let p = [x, -x];
            let (ca, cb) = (
                coincidence_density(&a, &p).unwrap(),
                coincidence_density(&b, &p).unwrap(),
            );
            assert!((ca - cb).abs() <= 4.0 * f64::EPSILON * ca);
        }
    }

    #[test]
    fn bunched_state_has_no_off_diagonal_coincidences() {
        let g = grid(32);
        let profile = gaussian_transverse(&g, 3e-5).unwrap();
        let source = crate::amplitude::CorrelatedSource::new(
            g.clone(),
            vec![lam(); 2],
            profile,
            TemporalModel::simultaneous(2, 1e-12, 0).unwrap(),
        )
        .unwrap();
        let a = source.to_amplitude().unwrap();
        for i in 0..32 {
            for j in 0..32 {
                let c = coincidence_density(&a, &[g.coord(i), g.coord(j)]).unwrap();
                if i.abs_diff(j) > 1 {
                    assert_eq!(c, 0.0);
                }
            }
        }
    }

    #[test]
    fn herald_on_product_state_returns_other_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (gu, gv) = (grid(11), grid(9));
        let (u, v) = (random_vec(&mut rng, 11), random_vec(&mut rng, 9));
        let a = product(&u, &v, &gu, &gv);
        let h = herald(
            &a,
            &HeraldEvent {
                photon: 1,
                position: gv.coord(4),
                time: 0.0,
            },
        )
        .unwrap();
        assert!((h.conditional.norm() - 1.0).abs() < 1e-14);
        let un = vector_norm(&gu, &u);
        // conditional = e^{iθ} u / |u|
        let c = h.conditional.tensor();
        let phase = c[[0]] / (u[0] / un);
        assert!((phase.norm() - 1.0).abs() < 1e-12);
        for i in 0..11 {
            assert!((c[[i]] - phase * u[i] / un).norm() < 1e-12);
        }
        let expected = v[4].norm_sqr() * un * un;
        assert!((h.probability_density - expected).abs() < 1e-12 * expected);
        assert_eq!(h.sample_index, 4);
    }

    #[test]
    fn herald_time_offsets() {
        // photon a over s0+s1, photon b over s0+s2+s3
        let (s0, s1, s2, s3) = (0.1, 0.4, 0.3, 0.2);
        let t = TemporalModel::simultaneous(2, 1e-12, 0)
            .unwrap()
            .advanced(0, s0 + s1)
            .advanced(1, s0 + s2 + s3);
        let g = grid(4);
        let a = NPhotonAmplitude::new(
            vec![g.clone(), g.clone()],
            vec![lam(); 2],
            ArrayD::from_elem(IxDyn(&[4, 4]), Complex64::new(1.0, 0.0)),
            t,
            NormConvention::Unnormalized,
        )
        .unwrap();
        let h = herald(
            &a,
            &HeraldEvent {
                photon: 1,
                position: 0.0,
                time: 0.0,
            },
        )
        .unwrap();
        let tau = h.time_offsets[0].unwrap();
        assert!((tau - (s1 - s2 - s3) / SPEED_OF_LIGHT).abs() < 1e-22);
        assert!((tau + 0.3336e-9).abs() < 1e-13);
        assert!(h.envelope_factor.is_some());
        assert_eq!(h.conditional.temporal().photons(), 1);
    }

    #[test]
    fn uncorrelated_photons_have_no_offset() {
        let g = grid(4);
        let t = TemporalModel::new(
            3,
            1e-12,
            0,
            &[TimeOffset {
                first: 1,
                second: 0,
                offset: 2e-12,
            }],
        )
        .unwrap();
        let a = NPhotonAmplitude::new(
            vec![g.clone(); 3],
            vec![lam(); 3],
            ArrayD::from_elem(IxDyn(&[4, 4, 4]), Complex64::new(1.0, 0.0)),
            t,
            NormConvention::Unnormalized,
        )
        .unwrap();
        let h = herald(
            &a,
            &HeraldEvent {
                photon: 0,
                position: 0.0,
                time: 0.0,
            },
        )
        .unwrap();
        assert!((h.time_offsets[0].unwrap() - 2e-12).abs() < 1e-24);
        assert_eq!(h.time_offsets[1], None);
    }

    #[test]
    fn dark_herald_is_impossible() {
        let g = grid(6);
        let mut v = vec![Complex64::new(1.0, 0.0); 6];
        v[2] = Complex64::new(0.0, 0.0);
        let a = product(&v.clone(), &v, &g, &g);
        let e = HeraldEvent {
            photon: 0,
            position: g.coord(2),
            time: 0.0,
        };
        assert!(matches!(herald(&a, &e), Err(Error::HeraldImpossible)));
        let single = NPhotonAmplitude::single(g.clone(), lam(), v, 1e-12).unwrap();
        assert!(matches!(herald(&single, &e), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn herald_completeness() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let grids = vec![grid(13), grid(17), grid(5)];
        let tensor = ArrayD::from_shape_vec(IxDyn(&[13, 17, 5]), random_vec(&mut rng, 13 * 17 * 5)).unwrap();
        let a = tensor_amplitude(grids.clone(), tensor);
        let total: f64 = (0..17)
            .map(|i| {
                herald(
                    &a,
                    &HeraldEvent {
                        photon: 1,
                        position: grids[1].coord(i),
                        time: 0.0,
                    },
                )
                .unwrap()
                .probability_density
                    * grids[1].spacing()
            })
            .sum();
        let n2 = a.norm().powi(2);
        assert!((total - n2).abs() < 1e-3 * n2);
        let scan: f64 = herald_density_scan(&a, 1).unwrap().iter().sum::<f64>() * grids[1].spacing();
        assert!((scan - n2).abs() < 1e-12 * n2);
    }

    #[test]
    fn symmetric_state_heralds_alike() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = grid(10);
        let raw = ArrayD::from_shape_vec(IxDyn(&[10, 10]), random_vec(&mut rng, 100)).unwrap();
        let sym = &raw + &raw.view().permuted_axes(IxDyn(&[1, 0]));
        let a = tensor_amplitude(vec![g.clone(), g.clone()], sym);
        let x = g.coord(3);
        let h0 = herald(
            &a,
            &HeraldEvent {
                photon: 0,
                position: x,
                time: 0.0,
            },
        )
        .unwrap();
        let h1 = herald(
            &a,
            &HeraldEvent {
                photon: 1,
                position: x,
                time: 0.0,
            },
        )
        .unwrap();
        for (p, q) in h0.conditional.tensor().iter().zip(h1.conditional.tensor()) {
            assert!((p - q).norm() < 1e-12);
        }
        let (p0, p1) = (intensity_profile(&a, 0).unwrap(), intensity_profile(&a, 1).unwrap());
        for (p, q) in p0.iter().zip(&p1) {
            assert!((p - q).abs() <= 1e-12 * p.abs().max(1.0));
        }
    }

    #[test]
    fn single_photon_profile_integrates_to_one() {
        let g = TransverseGrid::new(0.0, 0.0, 1e-3, 801).unwrap();
        let u = gaussian_transverse(&g, 1e-4).unwrap();
        let a = NPhotonAmplitude::single(g.clone(), lam(), u, 1e-12).unwrap();
        let p = intensity_profile(&a, 0).unwrap();
        assert!((p.iter().sum::<f64>() * g.spacing() - 1.0).abs() < 1e-9);
        assert!(p.iter().all(|v| *v >= 0.0));
        assert!(intensity_profile(&a, 1).is_err());
    }

    #[test]
    fn bunched_profile_rms_matches_width() {
        let (s, m) = (0.2e-3, 2.0);
        let g = TransverseGrid::new(0.0, 0.0, 5.0 * s * m, 161).unwrap();
        let source = crate::amplitude::CorrelatedSource::new(
            g.clone(),
            vec![lam(); 2],
            gaussian_transverse(&g, s * m).unwrap(),
            TemporalModel::simultaneous(2, 1e-12, 0).unwrap(),
        )
        .unwrap();
        let a = source.to_amplitude().unwrap();
        let (mean, rms) = moments(&g, &intensity_profile(&a, 0).unwrap());
        assert!(mean.abs() < 1e-12);
        assert!((rms / (s * m) - 1.0).abs() < 0.02);
    }
}
