//! Closed-form predictions for the gate outputs.
//!
//! `p_d0`/`p_d1` carry the leading-order expansions in 1/M and M/N (these are
//! the usual "theory" numbers); `series_d0`/`series_d1` keep the finite sums
//! they were expanded from. A `None` means the form has no prediction for
//! that detector.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{GateConfig, GateKind, PartyInputs};
use crate::components::cos_pow;
use crate::error::Result;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TheoryPrediction {
    pub p_d0: Option<f64>,
    pub p_d1: Option<f64>,
    pub series_d0: Option<f64>,
    pub series_d1: Option<f64>,
}

impl TheoryPrediction {
    pub fn p(&self, output: bool) -> Option<f64> {
        if output {
            self.p_d1
        } else {
            self.p_d0
        }
    }

    pub fn series(&self, output: bool) -> Option<f64> {
        if output {
            self.series_d1
        } else {
            self.series_d0
        }
    }
}

/// `sum_{m=1..len} sin^2(m pi / 2M) * (1 - cos^{power}(pi/2N))`
fn leak_sum(m: u32, len: u32, n: u32, power: u64) -> f64 {
    let per_pass = 1.0 - cos_pow(n, power);
    (1..=len)
        .map(|k| (k as f64 * PI / (2.0 * m as f64)).sin().powi(2))
        .sum::<f64>()
        * per_pass
}

/// Outer chain in working mode 1: the photon stays in zone 1 throughout.
fn zone1_survival(m: u32) -> f64 {
    cos_pow(m, 2 * m as u64)
}

/// Zone 2 after the last outer beam-splitter when every arm is emptied.
fn zone2_last_arm(m: u32) -> f64 {
    let t = PI / (2.0 * m as f64);
    cos_pow(m, 2 * (m as u64 - 1)) * t.sin().powi(2)
}

pub fn theory_prediction(cfg: &GateConfig, inputs: &PartyInputs) -> Result<TheoryPrediction> {
    cfg.validate()?;
    let (m, n) = (cfg.m, cfg.n);
    let (mf, nf) = (m as f64, n as f64);
    let pi2 = PI * PI;
    let bits = &inputs.bits;
    Ok(match cfg.kind {
        GateKind::Nand2 | GateKind::NandMulti(_) => {
            if bits.iter().all(|b| *b) {
                TheoryPrediction {
                    p_d0: Some(1.0 - pi2 / (4.0 * mf)),
                    p_d1: None,
                    series_d0: Some(zone1_survival(m)),
                    series_d1: Some(zone2_last_arm(m)),
                }
            } else {
                TheoryPrediction {
                    p_d0: None,
                    p_d1: Some(1.0 - mf * pi2 / (8.0 * nf)),
                    series_d0: None,
                    series_d1: Some(1.0 - leak_sum(m, m, n, 2 * n as u64)),
                }
            }
        }
        GateKind::Nor => {
            if bits.iter().all(|b| !*b) {
                TheoryPrediction {
                    p_d0: None,
                    p_d1: Some(1.0 - 3.0 * pi2 * mf / (4.0 * nf)),
                    series_d0: None,
                    series_d1: Some(1.0 - leak_sum(m, m, n, 12 * n as u64)),
                }
            } else {
                TheoryPrediction {
                    p_d0: Some(1.0 - pi2 / (4.0 * mf)),
                    p_d1: None,
                    series_d0: Some(zone1_survival(m)),
                    series_d1: Some(zone2_last_arm(m)),
                }
            }
        }
        GateKind::Xor => {
            let (j, jp) = (bits[0], bits[1]);
            let lead_d0;
            let lead_d1;
            if j == jp {
                let loss = if j { pi2 / (2.0 * mf) } else { pi2 * mf / (4.0 * nf) };
                lead_d0 = Some(1.0 - loss);
                lead_d1 = None;
            } else {
                lead_d0 = None;
                lead_d1 = Some(1.0 - pi2 * mf / (8.0 * nf) - pi2 / (4.0 * mf));
            }
            // Half-chain loss with all its CGUs open (1) or blocked (0).
            let p1 = 1.0 - cos_pow(m, 4 * m as u64);
            let p0 = leak_sum(m, 2 * m, n, 2 * n as u64);
            let loss = |b: bool| if b { p1 } else { p0 };
            let sign = if j == jp { 1.0 } else { -1.0 };
            let t = sign * (1.0 - loss(j)).sqrt() * (1.0 - loss(jp)).sqrt();
            TheoryPrediction {
                p_d0: lead_d0,
                p_d1: lead_d1,
                series_d0: Some((1.0 + t).powi(2) / 4.0),
                series_d1: Some((1.0 - t).powi(2) / 4.0),
            }
        }
    })
}
