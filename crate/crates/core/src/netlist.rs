//! Component netlists: temporally ordered optical elements with mode wiring.
//!
//! A netlist is a tree of [`Op`]s. Leaves are primitive [`Element`]s; long
//! channel chains are stored compactly as [`ChannelChain`] and expanded to
//! primitives on the fly; [`Op::Unit`] groups a replaceable subunit (an inner
//! chain, a CGU, a middle interferometer) behind a single entrance mode.
//!
//! Channel arms are resolved at run time by a [`ChannelControl`], so one
//! netlist serves every party input, noise realization and audit variant.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{ModeId, PhotonState, Rotation, SinkId};

/// Index of a controlling party within a gate (0 = first controller).
pub type Role = u8;

/// Parties in series on a transmission-channel arm, in ascending role order.
/// The arm is blocked as soon as any of them blocks; the first blocking
/// party's switchable detector absorbs the photon.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Owners(u8);

impl Owners {
    pub const FIRST: Owners = Owners(0b01);
    pub const SECOND: Owners = Owners(0b10);
    pub const BOTH: Owners = Owners(0b11);

    pub fn single(role: Role) -> Self {
        assert!(role < 8);
        Owners(1 << role)
    }

    /// All of roles `0..n`.
    pub fn all(n: usize) -> Self {
        assert!((1..=8).contains(&n));
        Owners(((1u16 << n) - 1) as u8)
    }

    pub fn union(self, other: Owners) -> Self {
        Owners(self.0 | other.0)
    }

    pub fn contains(self, role: Role) -> bool {
        self.0 & (1 << role) != 0
    }

    pub fn roles(self) -> impl Iterator<Item = Role> {
        (0..8u8).filter(move |r| self.contains(*r))
    }

    /// First owner (in series order) whose input is 0. `unblocked[r]` is the
    /// input bit of role `r` (`true` = 1 = unblock).
    pub fn first_blocking(self, unblocked: &[bool]) -> Option<Role> {
        self.roles()
            .find(|r| !unblocked.get(*r as usize).copied().unwrap_or(true))
    }
}

#[derive(Clone, Debug)]
struct Range {
    start: u32,
    len: u32,
    prefix: String,
    /// Index printed for the first entry; `None` for a single named entry.
    first_index: Option<u32>,
}

impl Range {
    fn label(&self, id: u32) -> String {
        match self.first_index {
            None => self.prefix.clone(),
            Some(f) => format!("{}[{}]", self.prefix, f + id - self.start),
        }
    }

    fn lookup(&self, name: &str) -> Option<u32> {
        match self.first_index {
            None => (self.prefix == name).then_some(self.start),
            Some(f) => {
                let rest = name.strip_prefix(self.prefix.as_str())?;
                let idx: u32 = rest.strip_prefix('[')?.strip_suffix(']')?.parse().ok()?;
                (idx >= f && idx - f < self.len).then_some(self.start + idx - f)
            }
        }
    }
}

/// Interned labels for a netlist's modes and sinks.
#[derive(Clone, Debug, Default)]
pub struct Registry {
    modes: Vec<Range>,
    mode_count: u32,
    sinks: Vec<Range>,
    sink_count: u32,
}

impl Registry {
    fn push(ranges: &mut Vec<Range>, count: &mut u32, prefix: &str, len: u32, fi: Option<u32>) -> u32 {
        let start = *count;
        ranges.push(Range {
            start,
            len,
            prefix: prefix.to_string(),
            first_index: fi,
        });
        *count += len;
        start
    }

    fn find(ranges: &[Range], id: u32) -> Option<&Range> {
        let i = ranges.partition_point(|r| r.start <= id);
        let r = ranges.get(i.checked_sub(1)?)?;
        (id < r.start + r.len).then_some(r)
    }

    pub fn mode_count(&self) -> u32 {
        self.mode_count
    }

    pub fn sink_count(&self) -> u32 {
        self.sink_count
    }

    pub fn has_mode(&self, m: ModeId) -> bool {
        m.0 < self.mode_count
    }

    pub fn mode_label(&self, m: ModeId) -> String {
        Self::find(&self.modes, m.0)
            .map(|r| r.label(m.0))
            .unwrap_or_else(|| m.to_string())
    }

    pub fn sink_label(&self, s: SinkId) -> String {
        Self::find(&self.sinks, s.0)
            .map(|r| r.label(s.0))
            .unwrap_or_else(|| s.to_string())
    }

    pub fn mode_by_label(&self, name: &str) -> Option<ModeId> {
        self.modes.iter().find_map(|r| r.lookup(name)).map(ModeId)
    }

    pub fn sink_by_label(&self, name: &str) -> Option<SinkId> {
        self.sinks.iter().find_map(|r| r.lookup(name)).map(SinkId)
    }
}

/// Contiguous block of fresh modes, addressed 1-based to match element
/// subscripts.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct ModeRange {
    pub start: ModeId,
    pub len: u32,
}

impl ModeRange {
    pub fn at(&self, k: u32) -> ModeId {
        debug_assert!(k >= 1 && k <= self.len);
        ModeId(self.start.0 + k - 1)
    }
}

/// Primitive optical element.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Element {
    BeamSplitter { left: ModeId, right: ModeId, rot: Rotation },
    PhaseShift { mode: ModeId, phase: f64, factor: Complex64 },
    Absorb { mode: ModeId, sink: SinkId },
    /// Beam-splitter against a loss port; `transmission` is `sin(theta_A)`.
    Attenuator { mode: ModeId, transmission: f64, sink: SinkId },
    /// Free propagation into a fresh mode label (mirror, identity optics).
    Route { from: ModeId, to: ModeId },
    /// Transmission-channel arm `arm` of channel unit `unit`; resolved by the
    /// run's [`ChannelControl`].
    Channel { unit: u32, arm: u32, mode: ModeId },
    /// Optically inert observation point.
    Probe { mode: ModeId, tag: u32 },
}

impl Element {
    pub fn phase_shift(mode: ModeId, phase: f64) -> Self {
        Element::PhaseShift {
            mode,
            phase,
            factor: Complex64::from_polar(1.0, phase),
        }
    }

    pub fn beam_splitter(left: ModeId, right: ModeId, theta: f64) -> Self {
        Element::BeamSplitter {
            left,
            right,
            rot: Rotation::new(theta),
        }
    }

    /// Applies every element kind except `Channel` (which needs a control).
    #[inline]
    pub fn apply(&self, state: &mut PhotonState) {
        match *self {
            Element::BeamSplitter { left, right, rot } => state.rotate(rot, left, right),
            Element::PhaseShift { mode, factor, .. } => state.apply_phase_factor(mode, factor),
            Element::Absorb { mode, sink } => state.absorb_mode(mode, sink),
            Element::Attenuator {
                mode,
                transmission,
                sink,
            } => state.attenuate(mode, transmission, sink),
            Element::Route { from, to } => state.route(from, to),
            Element::Channel { .. } | Element::Probe { .. } => {}
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ChainAttenuator {
    /// The attenuator sits on the right arm after this beam-splitter index.
    pub after: u32,
    pub transmission: f64,
    pub sink: SinkId,
}

/// A chain of identical beam-splitters whose right arms are transmission
/// channel. `arms.at(k)` is the right output of the k-th beam-splitter;
/// `arms.at(count)` is exit 2.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ChannelChain {
    pub left: ModeId,
    pub arms: ModeRange,
    pub rot: Rotation,
    pub unit: u32,
    pub attenuator: Option<ChainAttenuator>,
}

impl ChannelChain {
    pub fn count(&self) -> u32 {
        self.arms.len
    }

    pub fn exit2(&self) -> ModeId {
        self.arms.at(self.arms.len)
    }

    /// Visits the chain's primitive elements in temporal order.
    pub fn for_each_element(&self, mut f: impl FnMut(&Element)) {
        let n = self.count();
        for k in 1..=n {
            if k > 1 {
                f(&Element::Route {
                    from: self.arms.at(k - 1),
                    to: self.arms.at(k),
                });
            }
            f(&Element::BeamSplitter {
                left: self.left,
                right: self.arms.at(k),
                rot: self.rot,
            });
            if k < n {
                if let Some(att) = self.attenuator.filter(|a| a.after == k) {
                    f(&Element::Attenuator {
                        mode: self.arms.at(k),
                        transmission: att.transmission,
                        sink: att.sink,
                    });
                }
                f(&Element::Channel {
                    unit: self.unit,
                    arm: k,
                    mode: self.arms.at(k),
                });
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Element(Element),
    Chain(ChannelChain),
    /// Replaceable subunit; index into [`Netlist::units`].
    Unit { unit: usize, body: Vec<Op> },
}

/// A group of transmission-channel arms with one ownership assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelUnit {
    pub label: String,
    pub owners: Owners,
    /// Switchable-detector sink per owner, in series order.
    pub sw_sinks: Vec<(Role, SinkId)>,
    /// Sink for unexpected blocking by channel noise.
    pub noise_sink: SinkId,
}

impl ChannelUnit {
    pub fn sw_sink(&self, role: Role) -> Option<SinkId> {
        self.sw_sinks.iter().find(|(r, _)| *r == role).map(|(_, s)| *s)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnitKind {
    /// NAND inner chain (N beam-splitters, exit 2 to D2).
    InnerChain,
    /// CGU with N beam-splitters.
    CguN,
    /// CGU with 2N beam-splitters and Attenuator 1.
    Cgu2N,
    /// NOR middle interferometer (two half beam-splitters around the inner
    /// chain and Attenuator 2).
    MiddleInterferometer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnitInfo {
    pub kind: UnitKind,
    pub label: String,
    pub entrance: ModeId,
    pub owners: Owners,
    /// Absorber used when the whole unit is substituted.
    pub substitute_sink: SinkId,
}

/// What a channel arm does during one traversal.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ArmAction {
    /// Switch off: mirror, interference continues.
    Open,
    /// Photon absorbed into the given sink.
    Absorb(SinkId),
}

/// Run-time resolution of channel arms and subunit substitution.
pub trait ChannelControl {
    fn arm(&mut self, unit: &ChannelUnit, arm: u32) -> ArmAction;

    /// Returning `true` replaces the unit by a perfect absorber on its
    /// entrance.
    fn substitute(&mut self, _unit: &UnitInfo) -> bool {
        false
    }
}

/// Classical switchable detectors driven by fixed input bits.
#[derive(Clone, Debug)]
pub struct ClassicalControl<'a> {
    pub unblocked: &'a [bool],
}

impl ChannelControl for ClassicalControl<'_> {
    #[inline]
    fn arm(&mut self, unit: &ChannelUnit, _arm: u32) -> ArmAction {
        match unit.owners.first_blocking(self.unblocked) {
            Some(r) => ArmAction::Absorb(unit.sw_sink(r).expect("owner has a sink")),
            None => ArmAction::Open,
        }
    }
}

/// Every channel arm open or every arm blocked, regardless of owners.
#[derive(Copy, Clone, Debug)]
pub struct UniformControl {
    pub blocked: bool,
}

impl ChannelControl for UniformControl {
    fn arm(&mut self, unit: &ChannelUnit, _arm: u32) -> ArmAction {
        if self.blocked {
            ArmAction::Absorb(unit.sw_sinks[0].1)
        } else {
            ArmAction::Open
        }
    }
}

#[derive(Clone, Debug)]
pub struct Netlist {
    pub registry: Registry,
    pub ops: Vec<Op>,
    pub channel_units: Vec<ChannelUnit>,
    pub units: Vec<UnitInfo>,
}

impl Netlist {
    /// Fresh photon on a named or numbered mode of this netlist.
    pub fn prepare(&self, mode: ModeId) -> Result<PhotonState> {
        if !self.registry.has_mode(mode) {
            return Err(Error::Config(format!("unknown mode {mode}")));
        }
        Ok(PhotonState::new(mode))
    }

    pub fn prepare_named(&self, label: &str) -> Result<PhotonState> {
        let m = self
            .registry
            .mode_by_label(label)
            .ok_or_else(|| Error::Config(format!("unknown mode `{label}`")))?;
        Ok(PhotonState::new(m))
    }

    pub fn mode(&self, label: &str) -> Option<ModeId> {
        self.registry.mode_by_label(label)
    }

    pub fn sink(&self, label: &str) -> Option<SinkId> {
        self.registry.sink_by_label(label)
    }

    /// Visits every primitive element in temporal order (chains expanded,
    /// units entered).
    pub fn for_each_element(&self, mut f: impl FnMut(&Element)) {
        fn walk(ops: &[Op], f: &mut impl FnMut(&Element)) {
            for op in ops {
                match op {
                    Op::Element(e) => f(e),
                    Op::Chain(c) => c.for_each_element(&mut *f),
                    Op::Unit { body, .. } => walk(body, f),
                }
            }
        }
        walk(&self.ops, &mut f);
    }

    pub fn element_count(&self) -> usize {
        let mut n = 0;
        self.for_each_element(|_| n += 1);
        n
    }

    pub fn simulate<C: ChannelControl>(&self, state: &mut PhotonState, control: &mut C) {
        self.simulate_observed(state, control, &mut |_, _| {});
    }

    /// Runs the netlist, calling `observer` after every primitive element.
    pub fn simulate_observed<C, O>(&self, state: &mut PhotonState, control: &mut C, observer: &mut O)
    where
        C: ChannelControl,
        O: FnMut(&Element, &PhotonState),
    {
        self.run_ops(&self.ops, state, control, observer);
    }

    fn run_ops<C, O>(&self, ops: &[Op], state: &mut PhotonState, control: &mut C, observer: &mut O)
    where
        C: ChannelControl,
        O: FnMut(&Element, &PhotonState),
    {
        for op in ops {
            match op {
                Op::Element(e) => self.step(e, state, control, observer),
                Op::Chain(chain) => {
                    chain.for_each_element(|e| self.step(e, state, control, observer));
                }
                Op::Unit { unit, body } => {
                    let info = &self.units[*unit];
                    if control.substitute(info) {
                        let e = Element::Absorb {
                            mode: info.entrance,
                            sink: info.substitute_sink,
                        };
                        self.step(&e, state, control, observer);
                    } else {
                        self.run_ops(body, state, control, observer);
                    }
                }
            }
        }
    }

    #[inline]
    fn step<C, O>(&self, e: &Element, state: &mut PhotonState, control: &mut C, observer: &mut O)
    where
        C: ChannelControl,
        O: FnMut(&Element, &PhotonState),
    {
        match *e {
            Element::Channel { unit, arm, mode } => {
                // Nothing to decide on an empty arm; keeps noise draws tied to
                // arms the photon can actually reach.
                if state.amplitude(mode) != Complex64::new(0.0, 0.0) {
                    if let ArmAction::Absorb(sink) = control.arm(&self.channel_units[unit as usize], arm) {
                        state.absorb_mode(mode, sink);
                    }
                }
            }
            _ => e.apply(state),
        }
        observer(e, state);
    }
}

/// Incremental netlist construction with nested units.
#[derive(Debug, Default)]
pub struct NetlistBuilder {
    registry: Registry,
    stack: Vec<Vec<Op>>,
    channel_units: Vec<ChannelUnit>,
    units: Vec<UnitInfo>,
}

impl NetlistBuilder {
    pub fn new() -> Self {
        NetlistBuilder {
            stack: vec![Vec::new()],
            ..Default::default()
        }
    }

    pub fn mode(&mut self, label: &str) -> ModeId {
        let r = &mut self.registry;
        ModeId(Registry::push(&mut r.modes, &mut r.mode_count, label, 1, None))
    }

    /// `len` fresh modes labelled `prefix[1]..prefix[len]`.
    pub fn modes(&mut self, prefix: &str, len: u32) -> ModeRange {
        let r = &mut self.registry;
        let start = Registry::push(&mut r.modes, &mut r.mode_count, prefix, len, Some(1));
        ModeRange {
            start: ModeId(start),
            len,
        }
    }

    pub fn sink(&mut self, label: &str) -> SinkId {
        let r = &mut self.registry;
        SinkId(Registry::push(&mut r.sinks, &mut r.sink_count, label, 1, None))
    }

    pub fn push(&mut self, e: Element) {
        self.stack.last_mut().expect("open op list").push(Op::Element(e));
    }

    pub fn push_chain(&mut self, c: ChannelChain) {
        self.stack.last_mut().expect("open op list").push(Op::Chain(c));
    }

    /// Registers a channel unit, allocating one switchable-detector sink per
    /// owner (`SW[label][party]`) and a noise sink.
    pub fn channel_unit(&mut self, label: &str, owners: Owners, role_names: &[&str]) -> u32 {
        let sw_sinks = owners
            .roles()
            .map(|r| {
                let name = role_names.get(r as usize).copied().unwrap_or("?");
                (r, self.sink(&format!("SW[{label}][{name}]")))
            })
            .collect();
        let noise_sink = self.sink(&format!("D_noise[{label}]"));
        self.channel_units.push(ChannelUnit {
            label: label.to_string(),
            owners,
            sw_sinks,
            noise_sink,
        });
        (self.channel_units.len() - 1) as u32
    }

    /// Builds a replaceable unit; ops pushed inside `body` belong to it.
    pub fn unit<T>(
        &mut self,
        kind: UnitKind,
        label: &str,
        entrance: ModeId,
        owners: Owners,
        body: impl FnOnce(&mut Self) -> T,
    ) -> T {
        let substitute_sink = self.sink(&format!("D_sub[{label}]"));
        self.units.push(UnitInfo {
            kind,
            label: label.to_string(),
            entrance,
            owners,
            substitute_sink,
        });
        let idx = self.units.len() - 1;
        self.stack.push(Vec::new());
        let out = body(self);
        let ops = self.stack.pop().expect("unit op list");
        self.stack
            .last_mut()
            .expect("parent op list")
            .push(Op::Unit { unit: idx, body: ops });
        out
    }

    pub fn finish(mut self) -> Netlist {
        assert_eq!(self.stack.len(), 1, "unbalanced unit nesting");
        Netlist {
            registry: self.registry,
            ops: self.stack.pop().unwrap_or_default(),
            channel_units: self.channel_units,
            units: self.units,
        }
    }
}
