//! Beam-splitter kinds, interferometer chains and CGU units, with the
//! closed-form working-mode amplitudes used as oracles against simulation.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::netlist::{
    ChainAttenuator, ChannelChain, ClassicalControl, Element, Netlist, NetlistBuilder, Owners, UnitKind,
};
use crate::state::{ModeId, PhotonState, Rotation};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BsKind {
    /// 50/50, `theta = pi/4`.
    Half,
    /// Outer/middle chain splitter, `theta = pi/2M`.
    OuterM,
    /// Inner/CGU splitter, `theta = pi/2N`.
    InnerN,
    /// Attenuator 1, `sin(theta) = cos^{2N}(pi/2N)`.
    Att1,
    /// Attenuator 2, `sin(theta) = cos^{6N}(pi/2N)`.
    Att2,
}

fn check_mn(m: u32, n: u32) -> Result<()> {
    if m < 2 || n < 2 {
        return Err(Error::Parameter(format!("M and N must be >= 2 (got M={m}, N={n})")));
    }
    Ok(())
}

/// `cos^power(pi / 2K)`.
pub fn cos_pow(order: u32, power: u64) -> f64 {
    let c = (PI / (2.0 * order as f64)).cos();
    if power <= i32::MAX as u64 {
        c.powi(power as i32)
    } else {
        c.powf(power as f64)
    }
}

/// Through amplitude of Attenuator 1, `cos^{2N}(pi/2N)`.
pub fn att1_transmission(n: u32) -> f64 {
    cos_pow(n, 2 * n as u64)
}

/// Through amplitude of Attenuator 2, `cos^{6N}(pi/2N)`.
pub fn att2_transmission(n: u32) -> f64 {
    cos_pow(n, 6 * n as u64)
}

pub fn bs_angle(kind: BsKind, m: u32, n: u32) -> Result<f64> {
    check_mn(m, n)?;
    Ok(match kind {
        BsKind::Half => PI / 4.0,
        BsKind::OuterM => PI / (2.0 * m as f64),
        BsKind::InnerN => PI / (2.0 * n as f64),
        BsKind::Att1 => att1_transmission(n).asin(),
        BsKind::Att2 => att2_transmission(n).asin(),
    })
}

/// Working mode 1 (blocked arms): left amplitude after `k` splitters of
/// order `K`.
pub fn predict_mode1(k: u32, order: u32) -> f64 {
    cos_pow(order, k as u64)
}

/// Working mode 2 (K splitters, unblocked): `(left residual, right)`.
pub fn predict_mode2(_order: u32) -> (f64, f64) {
    // cos(K * pi/2K) and sin(K * pi/2K)
    (0.0, 1.0)
}

/// Working mode 3 (2M splitters, unblocked, no attenuator).
pub fn predict_mode3(_m: u32) -> f64 {
    -1.0
}

/// Working mode 4 (2N splitters, unblocked, Attenuator 1 in the middle).
pub fn predict_mode4(n: u32) -> f64 {
    -att1_transmission(n)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttenuatorSpec {
    /// Right arm index the attenuator sits on (between BS `after` and
    /// `after + 1`).
    pub after: u32,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSpec {
    /// Chain order K (`theta = pi/2K`).
    pub order: u32,
    pub bs_count: u32,
    /// Attenuator 1 (parametrised by `order`).
    pub attenuator: Option<AttenuatorSpec>,
    pub owner: Owners,
}

impl ChainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.order < 2 {
            return Err(Error::Parameter(format!("chain order must be >= 2, got {}", self.order)));
        }
        if self.bs_count == 0 {
            return Err(Error::Config("chain needs at least one beam-splitter".into()));
        }
        if let Some(a) = self.attenuator {
            if a.after == 0 || a.after >= self.bs_count {
                return Err(Error::Config(format!(
                    "attenuator after BS {} lies outside a {}-splitter chain",
                    a.after, self.bs_count
                )));
            }
        }
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CguVariant {
    CguN,
    Cgu2N,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CguSpec {
    pub variant: CguVariant,
    pub n: u32,
    pub owner: Owners,
}

impl CguSpec {
    pub fn chain_spec(&self) -> ChainSpec {
        match self.variant {
            CguVariant::CguN => ChainSpec {
                order: self.n,
                bs_count: self.n,
                attenuator: None,
                owner: self.owner,
            },
            CguVariant::Cgu2N => ChainSpec {
                order: self.n,
                bs_count: 2 * self.n,
                attenuator: Some(AttenuatorSpec { after: self.n }),
                owner: self.owner,
            },
        }
    }
}

pub(crate) const DEFAULT_ROLE_NAMES: [&str; 3] = ["bob", "charlie", "david"];

/// Appends a channel chain whose left mode is `left`; returns the chain so
/// the caller can wire exit 2.
pub(crate) fn push_chain(
    b: &mut NetlistBuilder,
    label: &str,
    left: ModeId,
    spec: &ChainSpec,
    role_names: &[&str],
) -> ChannelChain {
    let arms = b.modes(&format!("{label}.arm"), spec.bs_count);
    let unit = b.channel_unit(label, spec.owner, role_names);
    let attenuator = spec.attenuator.map(|a| ChainAttenuator {
        after: a.after,
        transmission: att1_transmission(spec.order),
        sink: b.sink(&format!("D_A1[{label}]")),
    });
    let chain = ChannelChain {
        left,
        arms,
        rot: Rotation::new(PI / (2.0 * spec.order as f64)),
        unit,
        attenuator,
    };
    b.push_chain(chain);
    chain
}

/// Appends a CGU as a replaceable unit whose exit 2 feeds detector
/// `D2[label]`. Exit 1 is the entrance mode itself.
pub(crate) fn push_cgu(
    b: &mut NetlistBuilder,
    label: &str,
    entrance: ModeId,
    spec: &CguSpec,
    role_names: &[&str],
) {
    let kind = match spec.variant {
        CguVariant::CguN => UnitKind::CguN,
        CguVariant::Cgu2N => UnitKind::Cgu2N,
    };
    b.unit(kind, label, entrance, spec.owner, |b| {
        let chain = push_chain(b, label, entrance, &spec.chain_spec(), role_names);
        let d2 = b.sink(&format!("D2[{label}]"));
        b.push(Element::Absorb {
            mode: chain.exit2(),
            sink: d2,
        });
    });
}

/// A standalone chain or CGU with its entrance and both exits left live.
#[derive(Clone, Debug)]
pub struct ChainNetwork {
    pub netlist: Netlist,
    pub entrance: ModeId,
    pub exit1: ModeId,
    pub exit2: ModeId,
}

impl ChainNetwork {
    /// Simulates with one input bit per owner role (`true` = unblock).
    pub fn run(&self, unblocked: &[bool]) -> PhotonState {
        let mut s = PhotonState::new(self.entrance);
        self.netlist.simulate(&mut s, &mut ClassicalControl { unblocked });
        s
    }

    pub fn run_uniform(&self, blocked: bool) -> PhotonState {
        let bits = [!blocked; 8];
        self.run(&bits)
    }
}

fn standalone(spec: &ChainSpec, label: &str, cgu: Option<&CguSpec>) -> Result<ChainNetwork> {
    spec.validate()?;
    let mut b = NetlistBuilder::new();
    let entrance = b.mode("in");
    let exit1 = b.mode("exit1");
    let exit2 = b.mode("exit2");
    let build = |b: &mut NetlistBuilder| {
        let chain = push_chain(b, label, entrance, spec, &DEFAULT_ROLE_NAMES);
        b.push(Element::Route {
            from: chain.exit2(),
            to: exit2,
        });
    };
    match cgu {
        Some(c) => {
            let kind = match c.variant {
                CguVariant::CguN => UnitKind::CguN,
                CguVariant::Cgu2N => UnitKind::Cgu2N,
            };
            b.unit(kind, label, entrance, c.owner, build);
        }
        None => build(&mut b),
    }
    b.push(Element::Route {
        from: entrance,
        to: exit1,
    });
    Ok(ChainNetwork {
        netlist: b.finish(),
        entrance,
        exit1,
        exit2,
    })
}

pub fn build_chain(spec: &ChainSpec) -> Result<ChainNetwork> {
    standalone(spec, "chain", None)
}

pub fn build_cgu(spec: &CguSpec) -> Result<ChainNetwork> {
    check_mn(2, spec.n)?;
    standalone(&spec.chain_spec(), "cgu", Some(spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn blocked_chain(order: u32, count: u32) -> ChainNetwork {
        build_chain(&ChainSpec {
            order,
            bs_count: count,
            attenuator: None,
            owner: Owners::FIRST,
        })
        .unwrap()
    }

    #[test]
    fn angles() {
        assert_abs_diff_eq!(bs_angle(BsKind::Half, 2, 2).unwrap(), PI / 4.0);
        assert_abs_diff_eq!(bs_angle(BsKind::OuterM, 30, 2).unwrap(), PI / 60.0);
        let a1 = bs_angle(BsKind::Att1, 2, 2500).unwrap();
        // (1 - x/2)^{2N}-style scalar evaluation via logs, independent of powi.
        let oracle = (5000.0 * (PI / 5000.0).cos().ln()).exp();
        assert_abs_diff_eq!(a1.sin(), oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(oracle, 0.999_013, epsilon = 1e-6);
        assert!(matches!(bs_angle(BsKind::Half, 1, 5), Err(Error::Parameter(_))));
        assert!(matches!(bs_angle(BsKind::Half, 5, 1), Err(Error::Parameter(_))));
    }

    #[test]
    fn mode_predictions() {
        assert_eq!(predict_mode1(0, 17), 1.0);
        assert_abs_diff_eq!(predict_mode1(60, 30), 0.921_010_068, epsilon = 1e-9);
        assert_eq!(predict_mode2(50), (0.0, 1.0));
        assert_eq!(predict_mode3(7), -1.0);
        assert_abs_diff_eq!(predict_mode4(2500), -0.999_013_526, epsilon = 1e-9);
        assert!(predict_mode4(1_000_000) < -0.99999);
        // Zeno trend: cos^{2k}(pi/2K) approaches 1 as K grows with k fixed.
        let mut prev = 0.0;
        for order in [10, 100, 1000, 10000] {
            let p = predict_mode1(10, order).powi(2);
            assert!(p > prev);
            assert!(p >= 1.0 - PI * PI * 10.0 / (4.0 * (order as f64).powi(2)) - 1e-12);
            prev = p;
        }
    }

    #[test]
    fn mode1_matches_simulation() {
        for order in [8u32, 30, 100] {
            for k in [1, 2, order / 2, order, 2 * order] {
                let net = blocked_chain(order, k);
                let s = net.run_uniform(true);
                assert_abs_diff_eq!(s.amplitude(net.exit1).re, predict_mode1(k, order), epsilon = 1e-12);
                assert_abs_diff_eq!(s.live_norm() + s.sink_total(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn mode2_and_mode3() {
        let net = blocked_chain(50, 50);
        let s = net.run_uniform(false);
        let (l, r) = predict_mode2(50);
        assert_abs_diff_eq!(s.amplitude(net.exit1).re, l, epsilon = 1e-12);
        assert_abs_diff_eq!(s.amplitude(net.exit2).re, r, epsilon = 1e-12);

        let net = blocked_chain(2, 2);
        let s = net.run_uniform(false);
        assert_abs_diff_eq!(s.amplitude(net.exit2).re, 1.0, epsilon = 1e-12);

        let net = blocked_chain(30, 60);
        let s = net.run_uniform(false);
        assert_abs_diff_eq!(s.amplitude(net.exit1).re, predict_mode3(30), epsilon = 1e-12);
        // Running the result through the same chain again restores the sign.
        let mut twice = PhotonState::new(net.entrance);
        for _ in 0..2 {
            net.netlist.simulate(&mut twice, &mut crate::netlist::UniformControl { blocked: false });
            twice.route(net.exit1, net.entrance);
        }
        assert_abs_diff_eq!(twice.amplitude(net.entrance).re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cgu_working_modes() {
        let n = 200;
        let cgu_n = build_cgu(&CguSpec {
            variant: CguVariant::CguN,
            n,
            owner: Owners::FIRST,
        })
        .unwrap();
        let s = cgu_n.run(&[true]);
        assert_abs_diff_eq!(s.amplitude(cgu_n.exit1).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.amplitude(cgu_n.exit2).re, 1.0, epsilon = 1e-12);

        let cgu_2n = build_cgu(&CguSpec {
            variant: CguVariant::Cgu2N,
            n,
            owner: Owners::BOTH,
        })
        .unwrap();
        let blocked = cgu_2n.run(&[false, true]).amplitude(cgu_2n.exit1).re;
        let open = cgu_2n.run(&[true, true]).amplitude(cgu_2n.exit1).re;
        assert_abs_diff_eq!(blocked, att1_transmission(n), epsilon = 1e-12);
        assert_abs_diff_eq!(open, predict_mode4(n), epsilon = 1e-12);
        assert_abs_diff_eq!(blocked, -open, epsilon = 1e-12);
    }

    #[test]
    fn both_owner_blocks_if_either_blocks() {
        let spec = CguSpec {
            variant: CguVariant::CguN,
            n: 20,
            owner: Owners::BOTH,
        };
        let net = build_cgu(&spec).unwrap();
        for (bits, blocked) in [([true, true], false), ([false, true], true), ([true, false], true), ([false, false], true)] {
            let s = net.run(&bits);
            let left = s.amplitude(net.exit1).re;
            if blocked {
                assert_abs_diff_eq!(left, predict_mode1(20, 20), epsilon = 1e-12);
            } else {
                assert_abs_diff_eq!(left, 0.0, epsilon = 1e-12);
            }
        }
        // Bob's switchable detector sits first in series.
        let s = net.run(&[false, false]);
        let bob = net.netlist.sink("SW[cgu][bob]").unwrap();
        let charlie = net.netlist.sink("SW[cgu][charlie]").unwrap();
        assert!(s.sink_probability(bob) > 0.0);
        assert_eq!(s.sink_probability(charlie), 0.0);
    }

    #[test]
    fn invalid_specs() {
        let bad = ChainSpec {
            order: 10,
            bs_count: 20,
            attenuator: Some(AttenuatorSpec { after: 20 }),
            owner: Owners::FIRST,
        };
        assert!(matches!(build_chain(&bad), Err(Error::Config(_))));
        let bad = ChainSpec {
            order: 1,
            bs_count: 2,
            attenuator: None,
            owner: Owners::FIRST,
        };
        assert!(matches!(build_chain(&bad), Err(Error::Parameter(_))));
    }
}
