use approx::assert_abs_diff_eq;
use zeno_core::entangle::{
    default_preparation, ghz_pipeline, ideal_oracle, run_gate_quantum, w_pipeline, ghz_spec, w_spec,
    AtomState,
};
use zeno_core::gates::{GateConfig, GateKind, GateNetwork, PartyInputs};

fn party_atoms(k: usize) -> Vec<(String, AtomState)> {
    ["bob", "charlie", "david"][..k]
        .iter()
        .map(|p| (p.to_string(), AtomState::real(0.6, 0.8).unwrap()))
        .collect()
}

#[test]
fn branches_equal_classical_runs() {
    for kind in [GateKind::Nand2, GateKind::Nor, GateKind::Xor, GateKind::NandMulti(3)] {
        let cfg = GateConfig::new(kind, 6, 60);
        let net = GateNetwork::build(&cfg).unwrap();
        let atoms = party_atoms(kind.parties());
        let ens = run_gate_quantum(&cfg, &atoms).unwrap();
        assert_eq!(ens.branches.len(), 1 << kind.parties());
        assert_abs_diff_eq!(ens.total(), 1.0, epsilon = 1e-12);
        for b in &ens.branches {
            let inputs = PartyInputs {
                parties: ens.parties.clone(),
                bits: b.config.clone(),
            };
            assert_eq!(b.photon, net.run_state(&inputs).unwrap(), "{kind} {:?}", b.config);
        }
    }
}

#[test]
fn pure_excited_atoms_give_single_branch() {
    let cfg = GateConfig::new(GateKind::Xor, 6, 60);
    let atoms = vec![("bob".into(), AtomState::excited()), ("charlie".into(), AtomState::excited())];
    let ens = run_gate_quantum(&cfg, &atoms).unwrap();
    assert_eq!(ens.branches.len(), 1);
    let direct = GateNetwork::build(&cfg).unwrap().run_state(&PartyInputs::from_bits(&[1, 1]).unwrap()).unwrap();
    assert_eq!(ens.branches[0].photon, direct);
}

#[test]
fn ideal_limits() {
    let ghz = ideal_oracle(&ghz_spec(8, 64), &default_preparation()).unwrap();
    assert_abs_diff_eq!(ghz.success_probability, 0.25, epsilon = 1e-15);
    let w = ideal_oracle(&w_spec(8, 64), &default_preparation()).unwrap();
    assert_abs_diff_eq!(w.success_probability, 0.375, epsilon = 1e-15);
}

#[test]
fn finite_pipelines_account_for_every_photon() {
    for r in [
        ghz_pipeline(8, 64, &default_preparation()).unwrap(),
        w_pipeline(8, 64, &default_preparation()).unwrap(),
    ] {
        assert_abs_diff_eq!(r.success_probability + r.failure_total(), 1.0, epsilon = 1e-12);
        assert!(r.failure_breakdown.keys().any(|k| k.starts_with("D_u[")));
    }
}

#[test]
fn ghz_bounds_at_m50_n5000() {
    let r = ghz_pipeline(50, 5000, &default_preparation()).unwrap();
    assert!(r.success_probability > 0.20 && r.success_probability <= 0.25);
    assert!(r.fidelity.unwrap() >= 0.98);
    // Phase coherence: both surviving branches real and positive.
    for b in &r.postselected {
        if b.config == "ggg" || b.config == "eee" {
            assert!(b.amplitude.re > 0.0 && b.amplitude.im.abs() < 1e-12);
        }
    }
}

#[test]
fn w_stage_three_pattern() {
    // After three ideal NOR stages the kept state is the four configurations
    // with at most one |g>, each with amplitude 1/(2 sqrt 2).
    let mut spec = w_spec(8, 64);
    spec.stages.truncate(3);
    spec.relabel_flip = false;
    spec.target = None;
    let r = ideal_oracle(&spec, &default_preparation()).unwrap();
    let labels: Vec<_> = r.postselected.iter().map(|b| b.config.as_str()).collect();
    assert_eq!(labels, ["eee", "eeg", "ege", "gee"]);
    for b in &r.postselected {
        assert_abs_diff_eq!(b.amplitude.re, 1.0 / (2.0 * 2f64.sqrt()), epsilon = 1e-15);
    }
}
