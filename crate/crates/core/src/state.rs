//! Single-photon amplitude state over discrete spatial modes.
//!
//! Amplitudes are kept unnormalized: probability that leaves the live modes
//! is booked into named sinks (detectors, switchable detectors, attenuator
//! loss ports) and never re-enters. `live_norm + sink_total` is therefore the
//! conserved quantity.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Spatial mode handle, interned by a [`crate::netlist::Registry`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeId(pub u32);

/// Probability sink handle (detector or absorber).
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SinkId(pub u32);

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "mode#{}", self.0)
    }
}

impl fmt::Display for SinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sink#{}", self.0)
    }
}

/// A real 2x2 rotation, the action of a lossless beam-splitter.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub theta: f64,
    pub cos: f64,
    pub sin: f64,
}

impl Rotation {
    pub fn new(theta: f64) -> Self {
        let (sin, cos) = theta.sin_cos();
        Rotation { theta, cos, sin }
    }
}

/// Unnormalized single-photon state.
///
/// Modes are stored sparsely; an absent mode has amplitude zero. Sinks are a
/// dense table indexed by [`SinkId`] and grow on first use.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhotonState {
    amps: Vec<(ModeId, Complex64)>,
    sinks: Vec<f64>,
}

impl PhotonState {
    /// Photon with unit amplitude on `mode`.
    pub fn new(mode: ModeId) -> Self {
        PhotonState {
            amps: vec![(mode, Complex64::new(1.0, 0.0))],
            sinks: Vec::new(),
        }
    }

    /// The empty state (no live amplitude, no absorbed probability).
    pub fn vacuum() -> Self {
        PhotonState::default()
    }

    /// Builds a state from explicit amplitudes. Repeated modes are summed.
    pub fn from_amplitudes<I: IntoIterator<Item = (ModeId, Complex64)>>(items: I) -> Self {
        let mut s = PhotonState::vacuum();
        for (m, a) in items {
            let cur = s.amplitude(m);
            s.set(m, cur + a);
        }
        s
    }

    #[inline]
    fn slot(&self, mode: ModeId) -> Option<usize> {
        self.amps.iter().position(|(m, _)| *m == mode)
    }

    #[inline]
    pub fn amplitude(&self, mode: ModeId) -> Complex64 {
        match self.slot(mode) {
            Some(i) => self.amps[i].1,
            None => Complex64::new(0.0, 0.0),
        }
    }

    #[inline]
    fn take(&mut self, mode: ModeId) -> Complex64 {
        match self.slot(mode) {
            Some(i) => self.amps.swap_remove(i).1,
            None => Complex64::new(0.0, 0.0),
        }
    }

    #[inline]
    fn set(&mut self, mode: ModeId, a: Complex64) {
        match self.slot(mode) {
            Some(i) => {
                if a == Complex64::new(0.0, 0.0) {
                    self.amps.swap_remove(i);
                } else {
                    self.amps[i].1 = a;
                }
            }
            None => {
                if a != Complex64::new(0.0, 0.0) {
                    self.amps.push((mode, a));
                }
            }
        }
    }

    /// Lossless beam-splitter on `(left, right)`:
    /// `(a_L, a_R) -> (a_L cos - a_R sin, a_L sin + a_R cos)`.
    pub fn apply_beam_splitter(&mut self, theta: f64, left: ModeId, right: ModeId) -> Result<()> {
        if left == right {
            return Err(Error::Config(format!(
                "beam-splitter ports must differ (both {left})"
            )));
        }
        self.rotate(Rotation::new(theta), left, right);
        Ok(())
    }

    /// Same as [`apply_beam_splitter`](Self::apply_beam_splitter) with a
    /// precomputed rotation. Callers guarantee `left != right`.
    #[inline]
    pub fn rotate(&mut self, rot: Rotation, left: ModeId, right: ModeId) {
        debug_assert_ne!(left, right);
        let l = self.take(left);
        let r = self.take(right);
        if l == Complex64::new(0.0, 0.0) && r == Complex64::new(0.0, 0.0) {
            return;
        }
        self.set(left, l * rot.cos - r * rot.sin);
        self.set(right, l * rot.sin + r * rot.cos);
    }

    /// Multiplies the amplitude on `mode` by `exp(i * phase)`.
    pub fn apply_phase_shift(&mut self, mode: ModeId, phase: f64) {
        self.apply_phase_factor(mode, Complex64::from_polar(1.0, phase));
    }

    #[inline]
    pub fn apply_phase_factor(&mut self, mode: ModeId, factor: Complex64) {
        if let Some(i) = self.slot(mode) {
            self.amps[i].1 *= factor;
        }
    }

    /// Moves all probability on `mode` into `sink`.
    #[inline]
    pub fn absorb_mode(&mut self, mode: ModeId, sink: SinkId) {
        let a = self.take(mode);
        let p = a.norm_sqr();
        if p > 0.0 {
            self.deposit(sink, p);
        }
    }

    /// Attenuator: the through amplitude is scaled by `transmission`
    /// (`sin(theta_A)`), the remaining `|a|^2 (1 - transmission^2)` is booked
    /// into `sink`.
    #[inline]
    pub fn attenuate(&mut self, mode: ModeId, transmission: f64, sink: SinkId) {
        if let Some(i) = self.slot(mode) {
            let a = self.amps[i].1;
            let kept = a * transmission;
            let lost = a.norm_sqr() - kept.norm_sqr();
            self.amps[i].1 = kept;
            if kept == Complex64::new(0.0, 0.0) {
                self.amps.swap_remove(i);
            }
            self.deposit(sink, lost);
        }
    }

    /// Renames a mode (free propagation / mirror into a fresh spatial mode).
    /// Any amplitude already on `to` is added.
    #[inline]
    pub fn route(&mut self, from: ModeId, to: ModeId) {
        if from == to {
            return;
        }
        let a = self.take(from);
        if a != Complex64::new(0.0, 0.0) {
            let b = self.amplitude(to);
            self.set(to, a + b);
        }
    }

    /// Adds probability to a sink directly.
    #[inline]
    pub fn deposit(&mut self, sink: SinkId, p: f64) {
        let idx = sink.0 as usize;
        if idx >= self.sinks.len() {
            self.sinks.resize(idx + 1, 0.0);
        }
        self.sinks[idx] += p;
    }

    pub fn live_norm(&self) -> f64 {
        self.amps.iter().map(|(_, a)| a.norm_sqr()).sum()
    }

    pub fn sink_total(&self) -> f64 {
        self.sinks.iter().sum()
    }

    pub fn mode_probability(&self, mode: ModeId) -> f64 {
        self.amplitude(mode).norm_sqr()
    }

    pub fn sink_probability(&self, sink: SinkId) -> f64 {
        self.sinks.get(sink.0 as usize).copied().unwrap_or(0.0)
    }

    /// Live modes with nonzero amplitude, in no particular order.
    pub fn modes(&self) -> impl Iterator<Item = (ModeId, Complex64)> + '_ {
        self.amps.iter().copied()
    }

    /// Sinks with nonzero accumulated probability, ordered by id.
    pub fn sinks(&self) -> impl Iterator<Item = (SinkId, f64)> + '_ {
        self.sinks
            .iter()
            .enumerate()
            .filter(|(_, p)| **p != 0.0)
            .map(|(i, p)| (SinkId(i as u32), *p))
    }

    /// Live amplitudes sorted by mode id, for comparisons.
    pub fn sorted_amplitudes(&self) -> Vec<(ModeId, Complex64)> {
        let mut v = self.amps.clone();
        v.sort_by_key(|(m, _)| *m);
        v
    }

    /// Multiplies every live amplitude by `factor` and every sink by
    /// `|factor|^2`.
    pub fn scale(&mut self, factor: Complex64) {
        for (_, a) in self.amps.iter_mut() {
            *a *= factor;
        }
        let p = factor.norm_sqr();
        for s in self.sinks.iter_mut() {
            *s *= p;
        }
        self.amps.retain(|(_, a)| *a != Complex64::new(0.0, 0.0));
    }
}
