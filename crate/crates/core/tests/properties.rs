use num_complex::Complex64;
use proptest::prelude::*;
use zeno_core::netlist::{ClassicalControl, Element, Owners};
use zeno_core::{ModeId, PhotonState, SinkId};

const MODES: u32 = 6;

#[derive(Clone, Debug)]
enum Op {
    Bs(u32, u32, f64),
    Phase(u32, f64),
    Absorb(u32, u32),
    Attenuate(u32, f64, u32),
    /// Route a mode onto a fresh label, then back (mirror pair).
    Relabel(u32),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        6 => (0..MODES, 0..MODES, -3.2f64..3.2).prop_map(|(a, b, t)| Op::Bs(a, b, t)),
        2 => (0..MODES, -3.2f64..3.2).prop_map(|(m, p)| Op::Phase(m, p)),
        1 => (0..MODES, 0..4u32).prop_map(|(m, s)| Op::Absorb(m, s)),
        2 => (0..MODES, 0.0f64..=1.0, 0..4u32).prop_map(|(m, t, s)| Op::Attenuate(m, t, s)),
        1 => (0..MODES).prop_map(Op::Relabel),
    ]
}

fn elements(op: &Op) -> Vec<Element> {
    let m = ModeId;
    match *op {
        Op::Bs(a, b, t) if a != b => vec![Element::beam_splitter(m(a), m(b), t)],
        Op::Bs(..) => vec![],
        Op::Phase(md, p) => vec![Element::phase_shift(m(md), p)],
        Op::Absorb(md, k) => vec![Element::Absorb { mode: m(md), sink: SinkId(k) }],
        Op::Attenuate(md, t, k) => vec![Element::Attenuator { mode: m(md), transmission: t, sink: SinkId(k) }],
        Op::Relabel(md) => vec![
            Element::Route { from: m(md), to: m(100 + md) },
            Element::Route { from: m(100 + md), to: m(md) },
        ],
    }
}

fn start() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), MODES as usize)
}

fn normalized(v: &[(f64, f64)]) -> Option<PhotonState> {
    let n: f64 = v.iter().map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
    (n > 1e-3).then(|| {
        PhotonState::from_amplitudes(
            v.iter()
                .enumerate()
                .map(|(i, (a, b))| (ModeId(i as u32), Complex64::new(a / n, b / n))),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // 64 cases x >= 160 ops: well over 10^4 element applications.
    #[test]
    fn conservation_after_every_element(init in start(), ops in prop::collection::vec(op(), 160..=256)) {
        let Some(mut s) = normalized(&init) else { return Ok(()) };
        for e in ops.iter().flat_map(elements) {
            e.apply(&mut s);
            let total = s.live_norm() + s.sink_total();
            prop_assert!((total - 1.0).abs() <= 1e-12, "after {:?}: total {}", e, total);
        }
    }

    #[test]
    fn amplitudes_are_linear(
        a in start(),
        b in start(),
        ca in (-1.0f64..1.0, -1.0f64..1.0),
        ops in prop::collection::vec(op(), 1..64),
    ) {
        let run = |v: &[(f64, f64)], scale: Complex64| {
            let mut s = PhotonState::from_amplitudes(
                v.iter().enumerate().map(|(i, (x, y))| (ModeId(i as u32), Complex64::new(*x, *y) * scale)),
            );
            for e in ops.iter().flat_map(elements) {
                e.apply(&mut s);
            }
            s
        };
        let k = Complex64::new(ca.0, ca.1);
        let one = Complex64::new(1.0, 0.0);
        let combined: Vec<(f64, f64)> = a
            .iter()
            .zip(&b)
            .map(|(x, y)| {
                let z = Complex64::new(x.0, x.1) * k + Complex64::new(y.0, y.1);
                (z.re, z.im)
            })
            .collect();
        let sa = run(&a, k);
        let sb = run(&b, one);
        let sc = run(&combined, one);
        for i in 0..MODES {
            let m = ModeId(i);
            let lhs = sc.amplitude(m);
            let rhs = sa.amplitude(m) + sb.amplitude(m);
            prop_assert!((lhs - rhs).norm() < 1e-10, "mode {i}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn chain_networks_conserve(order in 2u32..40, count in 1u32..60, bits in prop::collection::vec(any::<bool>(), 2)) {
        let spec = zeno_core::components::ChainSpec {
            order,
            bs_count: count,
            attenuator: None,
            owner: Owners::BOTH,
        };
        spec.validate().unwrap();
        let net = zeno_core::components::build_chain(&spec).unwrap();
        let mut s = PhotonState::new(net.entrance);
        let mut worst: f64 = 0.0;
        net.netlist.simulate_observed(&mut s, &mut ClassicalControl { unblocked: &bits }, &mut |_, st| {
            worst = worst.max((st.live_norm() + st.sink_total() - 1.0).abs());
        });
        prop_assert!(worst <= 1e-12);
    }
}
