//! Symbolic bookkeeping of the temporal correlations of an N-photon
//! amplitude.
//!
//! Time is never sampled. A source that emits photons simultaneously carries
//! factors `δ(t_i - t_j - τ_ij)` and a Gaussian envelope of rms duration `T`
//! on one reference photon. Each photon gets a potential `p_j` such that
//! every constraint reads `t_i - t_j = p_i - p_j`; propagating photon `j` over
//! an optical path `l` adds `l/c` to `p_j`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::SPEED_OF_LIGHT;

/// Constraint `δ(t_first - t_second - offset)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeOffset {
    pub first: usize,
    pub second: usize,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalModel {
    envelope_rms: f64,
    reference: usize,
    potentials: Vec<f64>,
    /// Connected-component label of each photon; photons in different
    /// components carry no temporal correlation.
    component: Vec<usize>,
}

impl TemporalModel {
    pub fn new(photons: usize, envelope_rms: f64, reference: usize, offsets: &[TimeOffset]) -> Result<Self> {
        if !(envelope_rms > 0.0 && envelope_rms.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "envelope rms duration must be positive, got {envelope_rms:e}"
            )));
        }
        if photons == 0 || reference >= photons {
            return Err(Error::InvalidArgument(format!(
                "reference photon {reference} out of range for {photons} photons"
            )));
        }
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); photons];
        for o in offsets {
            if o.first >= photons || o.second >= photons || !o.offset.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "bad temporal constraint {o:?} for {photons} photons"
                )));
            }
            // t_first = t_second + offset
            adjacency[o.second].push((o.first, o.offset));
            adjacency[o.first].push((o.second, -o.offset));
        }

        let scale = offsets.iter().map(|o| o.offset.abs()).fold(envelope_rms, f64::max);
        let tol = 1e-12 * scale;

        let mut potentials = vec![f64::NAN; photons];
        let mut component = vec![usize::MAX; photons];
        let mut label = 0;
        let order = std::iter::once(reference).chain((0..photons).filter(|&i| i != reference));
        for root in order {
            if component[root] != usize::MAX {
                continue;
            }
            potentials[root] = 0.0;
            component[root] = label;
            let mut stack = vec![root];
            while let Some(i) = stack.pop() {
                for &(j, d) in &adjacency[i] {
                    let p = potentials[i] + d;
                    if component[j] == usize::MAX {
                        potentials[j] = p;
                        component[j] = label;
                        stack.push(j);
                    } else if (potentials[j] - p).abs() > tol {
                        return Err(Error::InconsistentTemporal(format!(
                            "cycle through photons {i} and {j} has nonzero total offset {:e} s",
                            potentials[j] - p
                        )));
                    }
                }
            }
            label += 1;
        }

        Ok(Self {
            envelope_rms,
            reference,
            potentials,
            component,
        })
    }

    /// All photons emitted simultaneously: `δ(t_j - t_ref)` for every `j`.
    pub fn simultaneous(photons: usize, envelope_rms: f64, reference: usize) -> Result<Self> {
        let offsets: Vec<_> = (0..photons)
            .filter(|&j| j != reference)
            .map(|j| TimeOffset {
                first: j,
                second: reference,
                offset: 0.0,
            })
            .collect();
        Self::new(photons, envelope_rms, reference, &offsets)
    }

    pub fn photons(&self) -> usize {
        self.potentials.len()
    }

    pub fn envelope_rms(&self) -> f64 {
        self.envelope_rms
    }

    pub fn reference(&self) -> usize {
        self.reference
    }

    /// Accumulated delay of photon `i` relative to the source-plane time of
    /// the reference photon.
    pub fn delay(&self, i: usize) -> f64 {
        self.potentials[i]
    }

    /// `t_i - t_j` enforced by the amplitude, if the photons are correlated.
    pub fn offset(&self, i: usize, j: usize) -> Option<f64> {
        (self.component[i] == self.component[j]).then(|| self.potentials[i] - self.potentials[j])
    }

    /// Minimal constraint list equivalent to this model: each photon is tied
    /// to the first photon of its component.
    pub fn pairwise_offsets(&self) -> Vec<TimeOffset> {
        let n = self.photons();
        let mut out = Vec::new();
        for j in 0..n {
            let root = (0..n).find(|&i| self.component[i] == self.component[j]).unwrap_or(j);
            let root = if self.component[self.reference] == self.component[j] {
                self.reference
            } else {
                root
            };
            if root != j {
                out.push(TimeOffset {
                    first: j,
                    second: root,
                    offset: self.potentials[j] - self.potentials[root],
                });
            }
        }
        out
    }

    /// Model after photon `photon` travelled an optical path `path_length`.
    pub fn advanced(&self, photon: usize, path_length: f64) -> Self {
        let mut next = self.clone();
        next.potentials[photon] += path_length / SPEED_OF_LIGHT;
        next
    }

    pub fn advanced_by_delays(&self, delays: &[f64]) -> Self {
        let mut next = self.clone();
        for (p, d) in next.potentials.iter_mut().zip(delays) {
            *p += d;
        }
        next
    }

    /// Drops photon `photon`, e.g. after it has been detected. If it was the
    /// reference, another photon of the same component takes over.
    pub fn without_photon(&self, photon: usize) -> Option<Self> {
        let n = self.photons();
        if n < 2 || photon >= n {
            return None;
        }
        let reference = if photon == self.reference {
            (0..n)
                .find(|&i| i != photon && self.component[i] == self.component[photon])
                .unwrap_or(if photon == 0 { 1 } else { 0 })
        } else {
            self.reference
        };
        let keep = |v: &Vec<f64>| -> Vec<f64> {
            v.iter()
                .enumerate()
                .filter(|(i, _)| *i != photon)
                .map(|(_, x)| *x)
                .collect()
        };
        let component = self
            .component
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != photon)
            .map(|(_, c)| *c)
            .collect();
        Some(Self {
            envelope_rms: self.envelope_rms,
            reference: if reference > photon { reference - 1 } else { reference },
            potentials: keep(&self.potentials),
            component,
        })
    }

    /// Whether photon `i` shares the emission envelope of the reference.
    pub fn has_envelope(&self, i: usize) -> bool {
        self.component[i] == self.component[self.reference]
    }

    /// Source envelope `exp(-(t - p_i)²/4T²)/(2πT²)^{1/4}` seen by photon `i`
    /// detected at time `t`.
    pub fn envelope(&self, i: usize, t: f64) -> Option<f64> {
        if !self.has_envelope(i) {
            return None;
        }
        let tt = self.envelope_rms;
        let dt = t - self.potentials[i];
        Some((-dt * dt / (4.0 * tt * tt)).exp() / (2.0 * std::f64::consts::PI * tt * tt).powf(0.25))
    }

    /// Whether two models encode the same delays within `tolerance` seconds.
    pub fn delays_agree(&self, other: &Self, tolerance: f64) -> bool {
        self.photons() == other.photons()
            && self
                .potentials
                .iter()
                .zip(&other.potentials)
                .all(|(a, b)| (a - b).abs() <= tolerance)
    }
}
