//! Counterfactuality checks: replace channel-bearing subunits with perfect
//! absorbers and confirm the surviving detector amplitudes do not move.

use serde::{Deserialize, Serialize};

use super::{GateConfig, GateKind, GateNetwork, PartyInputs};
use crate::error::Result;
use crate::netlist::{ChannelControl, ChannelUnit, ClassicalControl, Element, UnitInfo, UnitKind, ArmAction};
use crate::state::PhotonState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub gate: GateKind,
    pub inputs: String,
    /// Largest |amplitude difference| over the compared detectors.
    pub max_deviation: f64,
    /// Detectors whose amplitudes were compared (`D0`, `D1`).
    pub compared: Vec<String>,
    /// Number of subunits replaced by absorbers.
    pub substituted: usize,
    /// NOR cases 2-4: |outer-arm amplitude| right after each middle
    /// recombination, in outer-chain order. Empty otherwise.
    pub balanced_residuals: Vec<f64>,
}

impl AuditReport {
    pub fn max_balanced_residual(&self) -> Option<f64> {
        self.balanced_residuals.iter().copied().reduce(f64::max)
    }
}

/// Classical control that also swaps out every unit whose channel the
/// photon could not have used.
struct Substituting<'a> {
    inner: ClassicalControl<'a>,
    count: usize,
}

impl ChannelControl for Substituting<'_> {
    fn arm(&mut self, unit: &ChannelUnit, arm: u32) -> ArmAction {
        self.inner.arm(unit, arm)
    }

    fn substitute(&mut self, unit: &UnitInfo) -> bool {
        let bits = self.inner.unblocked;
        let swap = match unit.kind {
            // Open channel: the chain sends everything to its own D2.
            UnitKind::InnerChain | UnitKind::CguN | UnitKind::Cgu2N => {
                unit.owners.first_blocking(bits).is_none()
            }
            // Balanced arms recombine fully into D3 unless both inputs are 0.
            UnitKind::MiddleInterferometer => bits.iter().any(|b| *b),
        };
        self.count += swap as usize;
        swap
    }
}

pub fn counterfactual_audit(cfg: &GateConfig, inputs: &PartyInputs) -> Result<AuditReport> {
    let net = GateNetwork::build(cfg)?;
    net.check_inputs(inputs)?;
    let bits = &inputs.bits;

    let mut normal = PhotonState::new(net.entrance);
    let mut residuals = Vec::new();
    let nor_balanced = cfg.kind == GateKind::Nor && bits.iter().any(|b| *b);
    net.netlist.simulate_observed(
        &mut normal,
        &mut ClassicalControl { unblocked: bits },
        &mut |e, s| {
            if let Element::Probe { mode, .. } = e {
                if nor_balanced {
                    residuals.push(s.amplitude(*mode).norm());
                }
            }
        },
    );

    let mut control = Substituting {
        inner: ClassicalControl { unblocked: bits },
        count: 0,
    };
    let swapped = net.run_with(&mut control);

    let compare_d0 = match cfg.kind {
        GateKind::Nand2 | GateKind::NandMulti(_) | GateKind::Nor => !cfg.kind.truth(bits),
        GateKind::Xor => true,
    };
    let compare_d1 = match cfg.kind {
        GateKind::Nand2 | GateKind::NandMulti(_) | GateKind::Nor => cfg.kind.truth(bits),
        GateKind::Xor => true,
    };
    let mut compared = Vec::new();
    let mut max_deviation: f64 = 0.0;
    for (on, mode, name) in [(compare_d0, net.out0, "D0"), (compare_d1, net.out1, "D1")] {
        if on {
            compared.push(name.to_string());
            max_deviation = max_deviation.max((normal.amplitude(mode) - swapped.amplitude(mode)).norm());
        }
    }

    Ok(AuditReport {
        gate: cfg.kind,
        inputs: inputs.bits_string(),
        max_deviation,
        compared,
        substituted: control.count,
        balanced_residuals: residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn audit(kind: GateKind, bits: &[u8]) -> AuditReport {
        counterfactual_audit(&GateConfig::new(kind, 6, 40), &PartyInputs::from_bits(bits).unwrap()).unwrap()
    }

    #[test]
    fn nand_blocked_is_trivially_counterfactual() {
        let r = audit(GateKind::Nand2, &[0, 0]);
        assert_eq!(r.max_deviation, 0.0);
        assert_eq!(r.substituted, 0);
    }

    #[test]
    fn nand_open_substitutes_every_inner_chain() {
        let r = audit(GateKind::Nand2, &[1, 1]);
        assert_eq!(r.substituted, 5);
        assert!(r.max_deviation < 1e-12);
    }

    #[test]
    fn nor_balanced_residuals() {
        let r = audit(GateKind::Nor, &[1, 0]);
        assert_eq!(r.balanced_residuals.len(), 5);
        assert!(r.max_balanced_residual().unwrap() < 1e-12);
        assert!(audit(GateKind::Nor, &[0, 0]).balanced_residuals.is_empty());
    }

    #[test]
    fn xor_all_inputs() {
        for bits in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            let r = audit(GateKind::Xor, &bits);
            assert!(r.max_deviation < 1e-9, "{bits:?}: {}", r.max_deviation);
            assert_eq!(r.compared, ["D0", "D1"]);
        }
    }
}
