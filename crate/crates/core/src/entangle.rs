//! Quantum controllers and postselected multi-gate pipelines.
//!
//! Each party's channel object is a three-level atom: `|g>` absorbs the
//! photon (the channel is blocked and the atom is promoted to `|u>`, heralded
//! by that party's `D_u`), `|e>` is transparent. Atomic configurations never
//! change unless absorption happens, so every configuration is an independent
//! branch evolving under the classical gate with the matching block pattern.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::components::DEFAULT_ROLE_NAMES;
use crate::error::{Error, Result};
use crate::gates::{GateConfig, GateKind, GateNetwork, OutcomeDistribution, PartyInputs};
use crate::state::PhotonState;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomState {
    pub amp_g: Complex64,
    pub amp_e: Complex64,
}

impl AtomState {
    pub fn ground() -> Self {
        AtomState {
            amp_g: Complex64::new(1.0, 0.0),
            amp_e: Complex64::new(0.0, 0.0),
        }
    }

    pub fn excited() -> Self {
        AtomState {
            amp_g: Complex64::new(0.0, 0.0),
            amp_e: Complex64::new(1.0, 0.0),
        }
    }

    /// `(|g> + |e>)/sqrt 2`
    pub fn plus() -> Self {
        let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        AtomState { amp_g: a, amp_e: a }
    }

    /// Classical object: input 1 unblocks (`|e>`), input 0 blocks (`|g>`).
    pub fn classical(bit: bool) -> Self {
        if bit {
            Self::excited()
        } else {
            Self::ground()
        }
    }

    pub fn real(amp_g: f64, amp_e: f64) -> Result<Self> {
        let s = AtomState {
            amp_g: Complex64::new(amp_g, 0.0),
            amp_e: Complex64::new(amp_e, 0.0),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.amp_g.norm_sqr() + self.amp_e.norm_sqr();
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!("atom amplitudes not normalized (|g|^2+|e|^2 = {n})")));
        }
        Ok(())
    }

    fn amp(&self, excited: bool) -> Complex64 {
        if excited {
            self.amp_e
        } else {
            self.amp_g
        }
    }
}

/// Atomic configuration label, e.g. `geg` (one letter per party).
pub fn config_label(bits: &[bool]) -> String {
    bits.iter().map(|b| if *b { 'e' } else { 'g' }).collect()
}

fn configurations(parties: usize) -> impl Iterator<Item = Vec<bool>> {
    crate::gates::all_inputs(parties).into_iter()
}

/// Maps a gate's `SW[role]` absorber to the heralding detector of the party
/// bound to that role.
fn failure_family(family: &str, stage_parties: &[String]) -> String {
    if let Some(role) = family.strip_prefix("SW[").and_then(|r| r.strip_suffix(']')) {
        if let Some(idx) = DEFAULT_ROLE_NAMES.iter().position(|n| *n == role) {
            if let Some(p) = stage_parties.get(idx) {
                return format!("D_u[{p}]");
            }
        }
    }
    family.to_string()
}

#[derive(Clone, Debug)]
pub struct Branch {
    pub config: Vec<bool>,
    pub weight: Complex64,
    pub photon: PhotonState,
}

/// One branch per atomic configuration with nonzero weight.
#[derive(Clone, Debug)]
pub struct BranchEnsemble {
    pub parties: Vec<String>,
    pub branches: Vec<Branch>,
}

impl BranchEnsemble {
    /// `sum |w|^2 (live + absorbed)`; 1 for a normalized preparation.
    pub fn total(&self) -> f64 {
        self.branches
            .iter()
            .map(|b| b.weight.norm_sqr() * (b.photon.live_norm() + b.photon.sink_total()))
            .sum()
    }
}

fn lookup_atoms(parties: &[String], atoms: &[(String, AtomState)]) -> Result<Vec<AtomState>> {
    parties
        .iter()
        .map(|p| {
            atoms
                .iter()
                .find(|(n, _)| n == p)
                .map(|(_, a)| *a)
                .ok_or_else(|| Error::Usage(format!("no atom prepared for party `{p}`")))
        })
        .collect()
}

/// Runs one gate with quantum controllers; `atoms` are matched to the gate's
/// roles in order.
pub fn run_gate_quantum(cfg: &GateConfig, atoms: &[(String, AtomState)]) -> Result<BranchEnsemble> {
    let net = GateNetwork::build(cfg)?;
    let k = cfg.kind.parties();
    if atoms.len() != k {
        return Err(Error::Usage(format!("{} gate needs {} atoms, got {}", cfg.kind, k, atoms.len())));
    }
    let parties: Vec<String> = atoms.iter().map(|(n, _)| n.clone()).collect();
    for (_, a) in atoms {
        a.validate()?;
    }
    let mut branches = Vec::new();
    for config in configurations(k) {
        let weight: Complex64 = atoms.iter().zip(&config).map(|((_, a), b)| a.amp(*b)).product();
        if weight.norm_sqr() == 0.0 {
            continue;
        }
        let inputs = PartyInputs {
            parties: parties.clone(),
            bits: config.clone(),
        };
        branches.push(Branch {
            photon: net.run_state(&inputs)?,
            config,
            weight,
        });
    }
    Ok(BranchEnsemble { parties, branches })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Port {
    Output0,
    Output1,
}

impl Port {
    pub fn bit(self) -> bool {
        self == Port::Output1
    }

    pub fn other(self) -> Port {
        match self {
            Port::Output0 => Port::Output1,
            Port::Output1 => Port::Output0,
        }
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Port::Output0 => "output0",
            Port::Output1 => "output1",
        })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageAction {
    /// Keep only this port; the other port's detector heralds failure.
    Postselect(Port),
    /// Terminal: report both ports.
    Measure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub gate: GateConfig,
    /// Controlling parties in role order.
    pub parties: Vec<String>,
    pub action: StageAction,
    /// Label of the failure detector on the rejected port.
    pub failure: String,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Ghz,
    W,
    /// W with every atom flipped: `(|gee> + |ege> + |eeg>)/sqrt 3`.
    WFlipped,
}

impl Target {
    pub const ALL: [Target; 3] = [Target::Ghz, Target::W, Target::WFlipped];

    pub fn name(self) -> &'static str {
        match self {
            Target::Ghz => "ghz",
            Target::W => "w",
            Target::WFlipped => "w_flipped",
        }
    }

    /// Normalized target amplitudes over three-party configurations.
    pub fn amplitudes(self) -> Vec<(String, f64)> {
        match self {
            Target::Ghz => ["ggg", "eee"].iter().map(|c| (c.to_string(), std::f64::consts::FRAC_1_SQRT_2)).collect(),
            Target::W => ["egg", "geg", "gge"].iter().map(|c| (c.to_string(), 1.0 / 3f64.sqrt())).collect(),
            Target::WFlipped => ["gee", "ege", "eeg"].iter().map(|c| (c.to_string(), 1.0 / 3f64.sqrt())).collect(),
        }
    }

    /// `|<target|psi>|^2 / <psi|psi>`; `None` for a zero vector.
    pub fn fidelity(self, psi: &[BranchAmplitude]) -> Option<f64> {
        let norm: f64 = psi.iter().map(|b| b.amplitude.norm_sqr()).sum();
        if norm <= 0.0 {
            return None;
        }
        let overlap: Complex64 = self
            .amplitudes()
            .iter()
            .filter_map(|(c, t)| psi.iter().find(|b| &b.config == c).map(|b| b.amplitude * *t))
            .sum();
        Some(overlap.norm_sqr() / norm)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub parties: Vec<String>,
    pub stages: Vec<Stage>,
    /// Flip `|e> <-> |g>` in the reported state.
    pub relabel_flip: bool,
    pub target: Option<Target>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchAmplitude {
    pub config: String,
    pub amplitude: Complex64,
}

/// State left on one output port of the last stage (unnormalized).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortResult {
    pub port: Port,
    pub probability: f64,
    pub amplitudes: Vec<BranchAmplitude>,
    /// Fidelity against every known three-party target (empty otherwise).
    pub fidelities: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    /// Probability that the photon reaches a designated final detector.
    pub success_probability: f64,
    /// Postselected amplitudes of the terminal postselection (after any
    /// relabeling); empty when the pipeline ends with a measure.
    pub postselected: Vec<BranchAmplitude>,
    pub fidelity: Option<f64>,
    pub target: Option<Target>,
    /// Probability per failure detector (`D_F`, `D_u[party]`, `D2`, ...).
    pub failure_breakdown: BTreeMap<String, f64>,
    /// Terminal measure only: both ports.
    pub measured: Vec<PortResult>,
}

impl PipelineResult {
    pub fn port(&self, port: Port) -> Option<&PortResult> {
        self.measured.iter().find(|p| p.port == port)
    }

    pub fn failure_total(&self) -> f64 {
        self.failure_breakdown.values().sum()
    }
}

/// How each stage transforms a branch photon.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evaluation {
    /// Full finite-(M, N) network simulation.
    Exact,
    /// Ideal gate maps: unit amplitude on the truth-table port.
    Ideal,
}

/// Port amplitudes and absorbed mass of one classical stage run.
#[derive(Clone, Debug)]
struct StageRun {
    amp: [Complex64; 2],
    absorbed: Vec<(String, f64)>,
}

fn stage_run(gate: &GateConfig, net: Option<&GateNetwork>, bits: &[bool], parties: &[String]) -> Result<StageRun> {
    match net {
        None => {
            let mut amp = [Complex64::new(0.0, 0.0); 2];
            amp[gate.kind.truth(bits) as usize] = Complex64::new(1.0, 0.0);
            Ok(StageRun { amp, absorbed: Vec::new() })
        }
        Some(net) => {
            let d: OutcomeDistribution = net.run(&PartyInputs {
                parties: parties.to_vec(),
                bits: bits.to_vec(),
            })?;
            let absorbed = d
                .absorbed
                .iter()
                .map(|(f, p)| (failure_family(f, parties), *p))
                .collect();
            Ok(StageRun {
                amp: [d.amp_d0, d.amp_d1],
                absorbed,
            })
        }
    }
}

impl Pipeline {
    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::Usage("pipeline has no stages".into()));
        }
        for (i, s) in self.stages.iter().enumerate() {
            s.gate.validate()?;
            if s.parties.len() != s.gate.kind.parties() {
                return Err(Error::Usage(format!(
                    "stage {} ({}) takes {} parties, got {}",
                    i + 1,
                    s.gate.kind,
                    s.gate.kind.parties(),
                    s.parties.len()
                )));
            }
            if let Some(p) = s.parties.iter().find(|p| !self.parties.contains(p)) {
                return Err(Error::Usage(format!("stage {} uses unknown party `{p}`", i + 1)));
            }
            if s.action == StageAction::Measure && i + 1 != self.stages.len() {
                return Err(Error::Usage("measure must be the last stage".into()));
            }
        }
        Ok(())
    }

    pub fn run(&self, atoms: &[(String, AtomState)], eval: Evaluation) -> Result<PipelineResult> {
        self.validate()?;
        let prep = lookup_atoms(&self.parties, atoms)?;
        for a in &prep {
            a.validate()?;
        }
        let nets: Vec<Option<GateNetwork>> = match eval {
            Evaluation::Ideal => self.stages.iter().map(|_| None).collect(),
            Evaluation::Exact => {
                // One network per distinct gate configuration.
                let mut built: HashMap<GateConfig, GateNetwork> = HashMap::new();
                let mut out = Vec::new();
                for s in &self.stages {
                    let net = match built.entry(s.gate) {
                        Entry::Occupied(e) => e.into_mut(),
                        Entry::Vacant(e) => e.insert(GateNetwork::build(&s.gate)?),
                    };
                    out.push(Some(net.clone()));
                }
                out
            }
        };
        let role_index: Vec<Vec<usize>> = self
            .stages
            .iter()
            .map(|s| s.parties.iter().map(|p| self.parties.iter().position(|q| q == p).unwrap()).collect())
            .collect();

        let mut memo: HashMap<(usize, Vec<bool>), StageRun> = HashMap::new();
        let mut failures: BTreeMap<String, f64> = BTreeMap::new();
        let mut finals: [Vec<BranchAmplitude>; 2] = [Vec::new(), Vec::new()];

        for config in configurations(self.parties.len()) {
            let weight: Complex64 = prep.iter().zip(&config).map(|(a, b)| a.amp(*b)).product();
            if weight.norm_sqr() == 0.0 {
                continue;
            }
            let mut amp = weight;
            let mut end: Option<[Complex64; 2]> = None;
            for (si, stage) in self.stages.iter().enumerate() {
                if amp.norm_sqr() == 0.0 {
                    break;
                }
                let bits: Vec<bool> = role_index[si].iter().map(|i| config[*i]).collect();
                let key = (si, bits);
                if !memo.contains_key(&key) {
                    let r = stage_run(&stage.gate, nets[si].as_ref(), &key.1, &stage.parties)?;
                    memo.insert(key.clone(), r);
                }
                let run = &memo[&key];
                let mass = amp.norm_sqr();
                for (f, p) in &run.absorbed {
                    *failures.entry(f.clone()).or_insert(0.0) += mass * p;
                }
                match stage.action {
                    StageAction::Postselect(port) => {
                        let lost = run.amp[port.other().bit() as usize].norm_sqr();
                        *failures.entry(stage.failure.clone()).or_insert(0.0) += mass * lost;
                        amp *= run.amp[port.bit() as usize];
                        if si + 1 == self.stages.len() {
                            let mut e = [Complex64::new(0.0, 0.0); 2];
                            e[port.bit() as usize] = amp;
                            end = Some(e);
                        }
                    }
                    StageAction::Measure => {
                        end = Some([amp * run.amp[0], amp * run.amp[1]]);
                    }
                }
            }
            if let Some(e) = end {
                let shown: Vec<bool> = if self.relabel_flip {
                    config.iter().map(|b| !b).collect()
                } else {
                    config.clone()
                };
                for (p, a) in e.iter().enumerate() {
                    if a.norm_sqr() > 0.0 {
                        finals[p].push(BranchAmplitude {
                            config: config_label(&shown),
                            amplitude: *a,
                        });
                    }
                }
            }
        }
        for v in finals.iter_mut() {
            v.sort_by(|a, b| a.config.cmp(&b.config));
        }
        failures.retain(|_, p| *p > 0.0);

        let prob = |v: &[BranchAmplitude]| v.iter().map(|b| b.amplitude.norm_sqr()).sum::<f64>();
        let three = self.parties.len() == 3;
        let port_result = |port: Port, v: &[BranchAmplitude]| PortResult {
            port,
            probability: prob(v),
            amplitudes: v.to_vec(),
            fidelities: if three {
                Target::ALL
                    .iter()
                    .filter_map(|t| t.fidelity(v).map(|f| (t.name().to_string(), f)))
                    .collect()
            } else {
                BTreeMap::new()
            },
        };

        let last = self.stages.last().expect("validated");
        Ok(match last.action {
            StageAction::Postselect(port) => {
                let v = &finals[port.bit() as usize];
                PipelineResult {
                    success_probability: prob(v),
                    postselected: v.clone(),
                    fidelity: self.target.and_then(|t| t.fidelity(v)),
                    target: self.target,
                    failure_breakdown: failures,
                    measured: Vec::new(),
                }
            }
            StageAction::Measure => PipelineResult {
                success_probability: prob(&finals[0]) + prob(&finals[1]),
                postselected: Vec::new(),
                fidelity: None,
                target: self.target,
                failure_breakdown: failures,
                measured: vec![
                    port_result(Port::Output0, &finals[0]),
                    port_result(Port::Output1, &finals[1]),
                ],
            },
        })
    }
}

fn party_names() -> Vec<String> {
    DEFAULT_ROLE_NAMES.iter().map(|s| s.to_string()).collect()
}

fn stage(kind: GateKind, m: u32, n: u32, parties: &[&str], action: StageAction, failure: &str) -> Stage {
    Stage {
        gate: GateConfig::new(kind, m, n),
        parties: parties.iter().map(|s| s.to_string()).collect(),
        action,
        failure: failure.to_string(),
    }
}

/// XOR(bob, charlie) then XOR(charlie, david), keeping output 0 both times.
pub fn ghz_spec(m: u32, n: u32) -> Pipeline {
    let keep = StageAction::Postselect(Port::Output0);
    Pipeline {
        parties: party_names(),
        stages: vec![
            stage(GateKind::Xor, m, n, &["bob", "charlie"], keep, "D_F"),
            stage(GateKind::Xor, m, n, &["charlie", "david"], keep, "D_F'"),
        ],
        relabel_flip: false,
        target: Some(Target::Ghz),
    }
}

/// Three pairwise NORs keeping output 0, then a three-party NAND keeping
/// output 1, then the `|e> <-> |g>` relabel.
pub fn w_spec(m: u32, n: u32) -> Pipeline {
    let keep0 = StageAction::Postselect(Port::Output0);
    Pipeline {
        parties: party_names(),
        stages: vec![
            stage(GateKind::Nor, m, n, &["bob", "charlie"], keep0, "D_F1"),
            stage(GateKind::Nor, m, n, &["bob", "david"], keep0, "D_F2"),
            stage(GateKind::Nor, m, n, &["charlie", "david"], keep0, "D_F3"),
            stage(GateKind::NandMulti(3), m, n, &["bob", "charlie", "david"], StageAction::Postselect(Port::Output1), "D0"),
        ],
        relabel_flip: true,
        target: Some(Target::W),
    }
}

/// Default preparation `(|g> + |e>)/sqrt 2` for bob, charlie and david.
pub fn default_preparation() -> Vec<(String, AtomState)> {
    party_names().into_iter().map(|p| (p, AtomState::plus())).collect()
}

pub fn ghz_pipeline(m: u32, n: u32, prep: &[(String, AtomState)]) -> Result<PipelineResult> {
    ghz_spec(m, n).run(prep, Evaluation::Exact)
}

pub fn w_pipeline(m: u32, n: u32, prep: &[(String, AtomState)]) -> Result<PipelineResult> {
    w_spec(m, n).run(prep, Evaluation::Exact)
}

/// The pipeline under ideal gate maps.
pub fn ideal_oracle(pipeline: &Pipeline, prep: &[(String, AtomState)]) -> Result<PipelineResult> {
    pipeline.run(prep, Evaluation::Ideal)
}
