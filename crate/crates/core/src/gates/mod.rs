//! NAND, M-type NAND, NOR and XOR gate networks.
//!
//! Each builder produces one [`GateNetwork`] per `(kind, M, N)`; party inputs
//! only select how channel arms behave at run time. Output ports are left as
//! live modes (`D0`, `D1`) so callers can read amplitudes as well as click
//! probabilities.

mod audit;
mod theory;

pub use audit::{counterfactual_audit, AuditReport};
pub use theory::{theory_prediction, TheoryPrediction};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use crate::components::{
    att2_transmission, push_cgu, push_chain, ChainSpec, CguSpec, CguVariant, DEFAULT_ROLE_NAMES,
};
use crate::error::{Error, Result};
use crate::netlist::{ChannelControl, ClassicalControl, Element, Netlist, NetlistBuilder, Owners, UnitKind};
use crate::state::{ModeId, PhotonState};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    Nand2,
    /// NAND with every channel arm owned in series by all parties.
    NandMulti(u8),
    Nor,
    Xor,
}

impl GateKind {
    pub fn parties(self) -> usize {
        match self {
            GateKind::NandMulti(k) => k as usize,
            _ => 2,
        }
    }

    pub fn name(self) -> String {
        match self {
            GateKind::Nand2 => "nand".into(),
            GateKind::NandMulti(k) => format!("nand{k}"),
            GateKind::Nor => "nor".into(),
            GateKind::Xor => "xor".into(),
        }
    }

    /// Ideal truth table: the output bit for the given inputs.
    pub fn truth(self, unblocked: &[bool]) -> bool {
        match self {
            GateKind::Nand2 | GateKind::NandMulti(_) => !unblocked.iter().all(|b| *b),
            GateKind::Nor => !unblocked.iter().any(|b| *b),
            GateKind::Xor => unblocked.iter().filter(|b| **b).count() % 2 == 1,
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl std::str::FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nand" | "nand2" => Ok(GateKind::Nand2),
            "nor" => Ok(GateKind::Nor),
            "xor" => Ok(GateKind::Xor),
            other => match other.strip_prefix("nand").and_then(|k| k.parse::<u8>().ok()) {
                Some(k) => Ok(GateKind::NandMulti(k)),
                None => Err(Error::Usage(format!("unknown gate kind `{s}`"))),
            },
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GateConfig {
    pub kind: GateKind,
    pub m: u32,
    pub n: u32,
}

impl GateConfig {
    pub fn new(kind: GateKind, m: u32, n: u32) -> Self {
        GateConfig { kind, m, n }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.n < 2 {
            return Err(Error::Parameter(format!(
                "M and N must be >= 2 (got M={}, N={})",
                self.m, self.n
            )));
        }
        if let GateKind::NandMulti(k) = self.kind {
            if !(2..=8).contains(&k) {
                return Err(Error::Usage(format!("multi-party NAND needs 2..=8 parties, got {k}")));
            }
        }
        Ok(())
    }

    /// `N >> M` is needed for good fidelity; this is the usual rule of thumb.
    pub fn well_conditioned(&self) -> bool {
        self.n as u64 >= 10 * (self.m as u64).pow(2)
    }
}

/// Input bit per controlling party, in role order (first controller first).
/// `true` is input 1 (unblock), `false` is input 0 (block).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyInputs {
    pub parties: Vec<String>,
    pub bits: Vec<bool>,
}

impl PartyInputs {
    /// Inputs for the default parties bob, charlie, david, ... from 0/1 bits.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let mut out = Vec::with_capacity(bits.len());
        for b in bits {
            match b {
                0 => out.push(false),
                1 => out.push(true),
                other => return Err(Error::Usage(format!("input bits are 0 or 1, got {other}"))),
            }
        }
        let parties = (0..out.len()).map(default_party_name).collect();
        Ok(PartyInputs { parties, bits: out })
    }

    pub fn named(entries: Vec<(String, bool)>) -> Self {
        let (parties, bits) = entries.into_iter().unzip();
        PartyInputs { parties, bits }
    }

    pub fn bits_string(&self) -> String {
        self.bits.iter().map(|b| if *b { '1' } else { '0' }).collect()
    }
}

pub fn default_party_name(role: usize) -> String {
    match DEFAULT_ROLE_NAMES.get(role) {
        Some(n) => n.to_string(),
        None => format!("party{}", role + 1),
    }
}

/// All `2^k` input combinations, first party as most significant bit.
pub fn all_inputs(parties: usize) -> Vec<Vec<bool>> {
    (0..1usize << parties)
        .map(|i| (0..parties).map(|r| i >> (parties - 1 - r) & 1 == 1).collect())
        .collect()
}

/// A built gate with its entrance and output port modes.
#[derive(Clone, Debug)]
pub struct GateNetwork {
    pub cfg: GateConfig,
    pub netlist: Netlist,
    pub entrance: ModeId,
    /// Output 0 port (detector D0).
    pub out0: ModeId,
    /// Output 1 port (detector D1).
    pub out1: ModeId,
    /// NOR only: outer-arm mode of each middle interferometer, probed right
    /// after its recombining beam-splitter.
    pub middle_arms: Vec<ModeId>,
}

impl GateNetwork {
    pub fn build(cfg: &GateConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(match cfg.kind {
            GateKind::Nand2 | GateKind::NandMulti(_) => build_nand(cfg),
            GateKind::Nor => build_nor(cfg),
            GateKind::Xor => build_xor(cfg),
        })
    }

    pub fn check_inputs(&self, inputs: &PartyInputs) -> Result<()> {
        let want = self.cfg.kind.parties();
        if inputs.bits.len() != want || inputs.parties.len() != want {
            return Err(Error::Usage(format!(
                "{} gate takes {} party inputs, got {}",
                self.cfg.kind,
                want,
                inputs.bits.len()
            )));
        }
        Ok(())
    }

    /// Runs the photon through the gate under an arbitrary channel control.
    pub fn run_with<C: ChannelControl>(&self, control: &mut C) -> PhotonState {
        let mut s = PhotonState::new(self.entrance);
        self.netlist.simulate(&mut s, control);
        s
    }

    pub fn run_state(&self, inputs: &PartyInputs) -> Result<PhotonState> {
        self.check_inputs(inputs)?;
        Ok(self.run_with(&mut ClassicalControl {
            unblocked: &inputs.bits,
        }))
    }

    pub fn run(&self, inputs: &PartyInputs) -> Result<OutcomeDistribution> {
        let s = self.run_state(inputs)?;
        Ok(self.distribution(&s))
    }

    pub fn distribution(&self, s: &PhotonState) -> OutcomeDistribution {
        OutcomeDistribution::from_state(self, s)
    }
}

/// Detector click probabilities for one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub p_d0: f64,
    pub p_d1: f64,
    #[serde(skip)]
    pub amp_d0: Complex64,
    #[serde(skip)]
    pub amp_d1: Complex64,
    /// Every other detector and absorber, aggregated by family (`D2`, `D3`,
    /// `SW[bob]`, `D_A1`, ...).
    pub absorbed: BTreeMap<String, f64>,
}

/// Family label of a sink: `SW[inner[3]][bob]` becomes `SW[bob]`,
/// `D2[cgu[7]]` becomes `D2`.
pub fn sink_family(label: &str) -> String {
    if let Some(rest) = label.strip_prefix("SW[") {
        if let Some(open) = rest.rfind('[') {
            return format!("SW{}", &rest[open..]);
        }
    }
    match label.find('[') {
        Some(i) => label[..i].to_string(),
        None => label.to_string(),
    }
}

impl OutcomeDistribution {
    fn from_state(net: &GateNetwork, s: &PhotonState) -> Self {
        let mut absorbed = BTreeMap::new();
        for (sink, p) in s.sinks() {
            *absorbed
                .entry(sink_family(&net.netlist.registry.sink_label(sink)))
                .or_insert(0.0) += p;
        }
        let amp_d0 = s.amplitude(net.out0);
        let amp_d1 = s.amplitude(net.out1);
        OutcomeDistribution {
            p_d0: amp_d0.norm_sqr(),
            p_d1: amp_d1.norm_sqr(),
            amp_d0,
            amp_d1,
            absorbed,
        }
    }

    pub fn p(&self, output: bool) -> f64 {
        if output {
            self.p_d1
        } else {
            self.p_d0
        }
    }

    pub fn total(&self) -> f64 {
        self.p_d0 + self.p_d1 + self.absorbed.values().sum::<f64>()
    }

    /// Output with the larger click probability (`true` = D1).
    pub fn argmax(&self) -> bool {
        self.p_d1 > self.p_d0
    }

    /// Click probability of `D_q` conditioned on any output click.
    pub fn effective(&self, output: bool) -> Option<f64> {
        let den = self.p_d0 + self.p_d1;
        (den > 0.0).then(|| self.p(output) / den)
    }
}

fn half_angle() -> f64 {
    PI / 4.0
}

fn outer_angle(m: u32) -> f64 {
    PI / (2.0 * m as f64)
}

fn build_nand(cfg: &GateConfig) -> GateNetwork {
    let parties = cfg.kind.parties();
    let owners = Owners::all(parties);
    let roles: Vec<String> = (0..parties).map(default_party_name).collect();
    let roles: Vec<&str> = roles.iter().map(String::as_str).collect();

    let mut b = NetlistBuilder::new();
    let zone1 = b.mode("zone1");
    let out0 = b.mode("D0");
    let out1 = b.mode("D1");
    let arms = b.modes("outer.arm", cfg.m);
    let inner = ChainSpec {
        order: cfg.n,
        bs_count: cfg.n,
        attenuator: None,
        owner: owners,
    };
    for k in 1..=cfg.m {
        if k > 1 {
            b.push(Element::Route {
                from: arms.at(k - 1),
                to: arms.at(k),
            });
        }
        b.push(Element::beam_splitter(zone1, arms.at(k), outer_angle(cfg.m)));
        if k < cfg.m {
            let label = format!("inner[{k}]");
            b.unit(UnitKind::InnerChain, &label, arms.at(k), owners, |b| {
                let chain = push_chain(b, &label, arms.at(k), &inner, &roles);
                let d2 = b.sink(&format!("D2[{label}]"));
                b.push(Element::Absorb {
                    mode: chain.exit2(),
                    sink: d2,
                });
            });
        }
    }
    b.push(Element::Route { from: zone1, to: out0 });
    b.push(Element::Route {
        from: arms.at(cfg.m),
        to: out1,
    });
    GateNetwork {
        cfg: *cfg,
        netlist: b.finish(),
        entrance: zone1,
        out0,
        out1,
        middle_arms: Vec::new(),
    }
}

/// CGU ownership along the NOR inner chain: first controller, second
/// controller, then both in series.
pub const NOR_CGU_OWNERS: [Owners; 3] = [Owners::FIRST, Owners::SECOND, Owners::BOTH];

fn build_nor(cfg: &GateConfig) -> GateNetwork {
    let mut b = NetlistBuilder::new();
    let zone1 = b.mode("zone1");
    let out0 = b.mode("D0");
    let out1 = b.mode("D1");
    let arms = b.modes("outer.arm", cfg.m);
    let mut middle_arms = Vec::new();
    for k in 1..=cfg.m {
        if k > 1 {
            b.push(Element::Route {
                from: arms.at(k - 1),
                to: arms.at(k),
            });
        }
        b.push(Element::beam_splitter(zone1, arms.at(k), outer_angle(cfg.m)));
        if k == cfg.m {
            break;
        }
        let arm = arms.at(k);
        middle_arms.push(arm);
        let label = format!("mid[{k}]");
        b.unit(UnitKind::MiddleInterferometer, &label, arm, Owners::BOTH, |b| {
            let right = b.mode(&format!("{label}.right"));
            b.push(Element::beam_splitter(arm, right, half_angle()));
            let a2 = b.sink(&format!("D_A2[{label}]"));
            b.push(Element::Attenuator {
                mode: arm,
                transmission: att2_transmission(cfg.n),
                sink: a2,
            });
            for (c, owner) in NOR_CGU_OWNERS.iter().enumerate() {
                let spec = CguSpec {
                    variant: CguVariant::Cgu2N,
                    n: cfg.n,
                    owner: *owner,
                };
                push_cgu(b, &format!("{label}.cgu[{}]", c + 1), right, &spec, &DEFAULT_ROLE_NAMES);
            }
            b.push(Element::phase_shift(right, PI));
            b.push(Element::beam_splitter(arm, right, half_angle()));
            b.push(Element::Probe {
                mode: arm,
                tag: k,
            });
            let d3 = b.sink(&format!("D3[{label}]"));
            b.push(Element::Absorb { mode: right, sink: d3 });
        });
    }
    b.push(Element::Route { from: zone1, to: out0 });
    b.push(Element::Route {
        from: arms.at(cfg.m),
        to: out1,
    });
    GateNetwork {
        cfg: *cfg,
        netlist: b.finish(),
        entrance: zone1,
        out0,
        out1,
        middle_arms,
    }
}

fn build_xor(cfg: &GateConfig) -> GateNetwork {
    let mut b = NetlistBuilder::new();
    let zone1 = b.mode("zone1");
    let zone2 = b.mode("zone2");
    let out0 = b.mode("D0");
    let out1 = b.mode("D1");
    let half = 2 * cfg.m;
    let arms = b.modes("mid.arm", 2 * half);
    b.push(Element::beam_splitter(zone1, zone2, half_angle()));
    for k in 1..=2 * half {
        // The two half-chains are separate: no arm joins BS_2M to BS_2M+1.
        if k > 1 && k != half + 1 {
            b.push(Element::Route {
                from: arms.at(k - 1),
                to: arms.at(k),
            });
        }
        b.push(Element::beam_splitter(zone2, arms.at(k), outer_angle(cfg.m)));
        if k == half || k == 2 * half {
            let leak = b.sink(&format!("D_H[{}]", k / half));
            b.push(Element::Absorb {
                mode: arms.at(k),
                sink: leak,
            });
            if k == half {
                b.push(Element::phase_shift(zone2, PI));
            }
            continue;
        }
        let spec = CguSpec {
            variant: CguVariant::CguN,
            n: cfg.n,
            owner: if k < half { Owners::FIRST } else { Owners::SECOND },
        };
        push_cgu(&mut b, &format!("cgu[{k}]"), arms.at(k), &spec, &DEFAULT_ROLE_NAMES);
    }
    b.push(Element::beam_splitter(zone1, zone2, half_angle()));
    b.push(Element::Route { from: zone1, to: out0 });
    b.push(Element::Route { from: zone2, to: out1 });
    GateNetwork {
        cfg: *cfg,
        netlist: b.finish(),
        entrance: zone1,
        out0,
        out1,
        middle_arms: Vec::new(),
    }
}

fn expect_kind(cfg: &GateConfig, ok: bool, op: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Usage(format!("{op} called with a {} gate", cfg.kind)))
    }
}

pub fn run_nand2(cfg: &GateConfig, inputs: &PartyInputs) -> Result<OutcomeDistribution> {
    expect_kind(cfg, cfg.kind == GateKind::Nand2, "run_nand2")?;
    GateNetwork::build(cfg)?.run(inputs)
}

pub fn run_nand_multi(cfg: &GateConfig, inputs: &PartyInputs) -> Result<OutcomeDistribution> {
    expect_kind(cfg, matches!(cfg.kind, GateKind::NandMulti(_)), "run_nand_multi")?;
    GateNetwork::build(cfg)?.run(inputs)
}

pub fn run_nor(cfg: &GateConfig, inputs: &PartyInputs) -> Result<OutcomeDistribution> {
    expect_kind(cfg, cfg.kind == GateKind::Nor, "run_nor")?;
    GateNetwork::build(cfg)?.run(inputs)
}

pub fn run_xor(cfg: &GateConfig, inputs: &PartyInputs) -> Result<OutcomeDistribution> {
    expect_kind(cfg, cfg.kind == GateKind::Xor, "run_xor")?;
    GateNetwork::build(cfg)?.run(inputs)
}

/// Dispatches on `cfg.kind`.
pub fn run_gate(cfg: &GateConfig, inputs: &PartyInputs) -> Result<OutcomeDistribution> {
    GateNetwork::build(cfg)?.run(inputs)
}
