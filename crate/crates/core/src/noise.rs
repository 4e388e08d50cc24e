//! Monte Carlo channel noise: open transmission-channel arms are blocked by
//! stray objects with probability `gamma`, and the effective output
//! probability is estimated over many blocking realizations.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::{GateConfig, GateNetwork, PartyInputs};
use crate::netlist::{ArmAction, ChannelControl, ChannelUnit, ClassicalControl};

/// When a fresh blocking draw is made.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoisePolicy {
    /// Independent draw for every arm on every photon pass.
    #[default]
    PerArm,
    /// One draw per channel unit per run; a blocked unit stays blocked.
    PerUnit,
}

impl std::str::FromStr for NoisePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-arm" | "per_arm" | "arm" => Ok(NoisePolicy::PerArm),
            "per-unit" | "per_unit" | "unit" => Ok(NoisePolicy::PerUnit),
            _ => Err(Error::Usage(format!("unknown noise policy `{s}`"))),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub gamma: f64,
    pub samples: u32,
    pub seed: u64,
    #[serde(default)]
    pub policy: NoisePolicy,
}

impl NoiseModel {
    pub fn new(gamma: f64, samples: u32, seed: u64) -> Self {
        NoiseModel {
            gamma,
            samples,
            seed,
            policy: NoisePolicy::PerArm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Parameter(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        if self.samples == 0 {
            return Err(Error::Parameter("samples must be >= 1".into()));
        }
        Ok(())
    }
}

/// Sample-mean detector probabilities and the derived effective
/// probabilities `E_q = P(Dq) / (P(D0) + P(D1))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveProbabilities {
    pub gamma: f64,
    pub inputs: String,
    pub samples: u32,
    pub mean_p_d0: f64,
    pub mean_p_d1: f64,
    /// `None` when no sample produced any output click.
    pub e_d0: Option<f64>,
    pub e_d1: Option<f64>,
    /// Standard error of `e_d0` (and of `e_d1`, which is `1 - e_d0`).
    pub std_error: Option<f64>,
}

impl EffectiveProbabilities {
    pub fn e(&self, output: bool) -> Option<f64> {
        if output {
            self.e_d1
        } else {
            self.e_d0
        }
    }
}

struct NoisyControl<'a> {
    classical: ClassicalControl<'a>,
    gamma: f64,
    policy: NoisePolicy,
    rng: ChaCha8Rng,
    unit_draws: HashMap<u32, bool>,
}

impl ChannelControl for NoisyControl<'_> {
    fn arm(&mut self, unit: &ChannelUnit, arm: u32) -> ArmAction {
        if let ArmAction::Absorb(s) = self.classical.arm(unit, arm) {
            return ArmAction::Absorb(s);
        }
        let blocked = match self.policy {
            NoisePolicy::PerArm => self.rng.gen_bool(self.gamma),
            NoisePolicy::PerUnit => {
                let (gamma, rng) = (self.gamma, &mut self.rng);
                *self
                    .unit_draws
                    .entry(unit.noise_sink.0)
                    .or_insert_with(|| rng.gen_bool(gamma))
            }
        };
        if blocked {
            ArmAction::Absorb(unit.noise_sink)
        } else {
            ArmAction::Open
        }
    }
}

/// Independent stream per (grid point, sample); fixed regardless of thread
/// scheduling.
fn sample_rng(seed: u64, grid: u32, sample: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((grid as u64) << 32) | sample as u64);
    rng
}

fn run_on(
    net: &GateNetwork,
    inputs: &PartyInputs,
    noise: &NoiseModel,
    grid: u32,
) -> EffectiveProbabilities {
    let draws: Vec<(f64, f64)> = (0..noise.samples)
        .into_par_iter()
        .map(|i| {
            let mut control = NoisyControl {
                classical: ClassicalControl {
                    unblocked: &inputs.bits,
                },
                gamma: noise.gamma,
                policy: noise.policy,
                rng: sample_rng(noise.seed, grid, i),
                unit_draws: HashMap::new(),
            };
            let s = net.run_with(&mut control);
            (s.mode_probability(net.out0), s.mode_probability(net.out1))
        })
        .collect();

    // Sequential reduction keeps results independent of the thread count.
    let n = draws.len() as f64;
    let (s0, s1) = draws.iter().fold((0.0, 0.0), |acc, d| (acc.0 + d.0, acc.1 + d.1));
    let (m0, m1) = (s0 / n, s1 / n);
    let den = m0 + m1;
    let (e_d0, e_d1, std_error) = if den > 0.0 {
        let e0 = m0 / den;
        // Delta method for a ratio of means.
        let var = if draws.len() > 1 {
            draws
                .iter()
                .map(|(p0, p1)| (p0 - e0 * (p0 + p1)).powi(2))
                .sum::<f64>()
                / (n - 1.0)
        } else {
            0.0
        };
        (Some(e0), Some(m1 / den), Some((var / n).sqrt() / den))
    } else {
        (None, None, None)
    };
    EffectiveProbabilities {
        gamma: noise.gamma,
        inputs: inputs.bits_string(),
        samples: noise.samples,
        mean_p_d0: m0,
        mean_p_d1: m1,
        e_d0,
        e_d1,
        std_error,
    }
}

pub fn run_noisy(cfg: &GateConfig, inputs: &PartyInputs, noise: &NoiseModel) -> Result<EffectiveProbabilities> {
    noise.validate()?;
    let net = GateNetwork::build(cfg)?;
    net.check_inputs(inputs)?;
    Ok(run_on(&net, inputs, noise, 0))
}

/// One row per (gamma, inputs) pair, gamma-major, in grid order. `noise.gamma`
/// is ignored in favour of the grid.
pub fn noise_sweep(
    cfg: &GateConfig,
    inputs: &[PartyInputs],
    gammas: &[f64],
    noise: &NoiseModel,
) -> Result<Vec<EffectiveProbabilities>> {
    if gammas.is_empty() || inputs.is_empty() {
        return Err(Error::Usage("noise sweep needs at least one gamma and one input".into()));
    }
    let net = GateNetwork::build(cfg)?;
    for i in inputs {
        net.check_inputs(i)?;
    }
    let mut rows = Vec::with_capacity(gammas.len() * inputs.len());
    for (gi, gamma) in gammas.iter().enumerate() {
        let model = NoiseModel { gamma: *gamma, ..*noise };
        model.validate()?;
        for (ii, inp) in inputs.iter().enumerate() {
            let grid = (gi * inputs.len() + ii) as u32;
            rows.push(run_on(&net, inp, &model, grid));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::GateKind;

    fn inputs(b: &[u8]) -> PartyInputs {
        PartyInputs::from_bits(b).unwrap()
    }

    #[test]
    fn zero_gamma_is_exact() {
        let cfg = GateConfig::new(GateKind::Nor, 4, 40);
        let exact = GateNetwork::build(&cfg).unwrap().run(&inputs(&[1, 0])).unwrap();
        let r = run_noisy(&cfg, &inputs(&[1, 0]), &NoiseModel::new(0.0, 5, 1)).unwrap();
        assert_eq!(r.mean_p_d0, exact.p_d0);
        assert_eq!(r.e_d0, exact.effective(false));
        assert_eq!(r.std_error, Some(0.0));
    }

    #[test]
    fn reproducible_for_seed() {
        let cfg = GateConfig::new(GateKind::Xor, 4, 30);
        let a = run_noisy(&cfg, &inputs(&[1, 1]), &NoiseModel::new(0.1, 40, 9)).unwrap();
        let b = run_noisy(&cfg, &inputs(&[1, 1]), &NoiseModel::new(0.1, 40, 9)).unwrap();
        let c = run_noisy(&cfg, &inputs(&[1, 1]), &NoiseModel::new(0.1, 40, 10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.mean_p_d0, c.mean_p_d0);
    }

    #[test]
    fn rejects_bad_model() {
        let cfg = GateConfig::new(GateKind::Xor, 4, 30);
        assert!(matches!(
            run_noisy(&cfg, &inputs(&[1, 1]), &NoiseModel::new(1.5, 4, 0)),
            Err(Error::Parameter(_))
        ));
        assert!(run_noisy(&cfg, &inputs(&[1, 1]), &NoiseModel::new(0.1, 0, 0)).is_err());
    }

    #[test]
    fn fully_blocked_channel_stays_in_range() {
        let cfg = GateConfig::new(GateKind::Xor, 4, 30);
        let r = run_noisy(&cfg, &inputs(&[1, 1]), &NoiseModel::new(1.0, 3, 0)).unwrap();
        let e = r.e_d0.unwrap();
        assert!((0.0..=1.0).contains(&e));
    }

    #[test]
    fn per_unit_policy_runs() {
        let cfg = GateConfig::new(GateKind::Nor, 4, 40);
        let mut m = NoiseModel::new(0.2, 50, 3);
        m.policy = NoisePolicy::PerUnit;
        let r = run_noisy(&cfg, &inputs(&[1, 1]), &m).unwrap();
        assert!(r.e_d0.unwrap() > 0.0);
    }
}
