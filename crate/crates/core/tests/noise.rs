use zeno_core::gates::{all_inputs, GateConfig, GateKind, GateNetwork, PartyInputs};
use zeno_core::noise::{noise_sweep, run_noisy, NoiseModel};

fn inputs(b: &[u8]) -> PartyInputs {
    PartyInputs::from_bits(b).unwrap()
}

fn all_two_party() -> Vec<PartyInputs> {
    all_inputs(2)
        .into_iter()
        .map(|b| PartyInputs::from_bits(&b.iter().map(|x| *x as u8).collect::<Vec<_>>()).unwrap())
        .collect()
}

#[test]
fn blocked_inputs_ignore_gamma() {
    for (kind, m, n, port) in [(GateKind::Nor, 8, 70, true), (GateKind::Xor, 10, 50, false)] {
        let cfg = GateConfig::new(kind, m, n);
        let rows = noise_sweep(&cfg, &[inputs(&[0, 0])], &[0.0, 0.01, 0.02, 0.03], &NoiseModel::new(0.0, 64, 5)).unwrap();
        let base = rows[0].e(port).unwrap();
        for r in &rows {
            assert!((r.e(port).unwrap() - base).abs() <= 1e-12, "{kind} gamma={}", r.gamma);
        }
    }
}

#[test]
fn zero_gamma_matches_exact_run() {
    let cfg = GateConfig::new(GateKind::Xor, 10, 50);
    let net = GateNetwork::build(&cfg).unwrap();
    for inp in all_two_party() {
        let exact = net.run(&inp).unwrap();
        let r = run_noisy(&cfg, &inp, &NoiseModel::new(0.0, 3, 1)).unwrap();
        assert!((r.mean_p_d0 - exact.p_d0).abs() <= 1e-15);
        assert!((r.mean_p_d1 - exact.p_d1).abs() <= 1e-15);
    }
}

#[test]
fn sweep_is_deterministic() {
    let cfg = GateConfig::new(GateKind::Nor, 6, 40);
    let model = NoiseModel::new(0.0, 50, 77);
    let a = noise_sweep(&cfg, &all_two_party(), &[0.0, 0.05], &model).unwrap();
    let b = noise_sweep(&cfg, &all_two_party(), &[0.0, 0.05], &model).unwrap();
    assert_eq!(a, b);
}

#[test]
fn standard_error_shrinks_with_samples() {
    let cfg = GateConfig::new(GateKind::Xor, 10, 50);
    let small = run_noisy(&cfg, &inputs(&[1, 1]), &NoiseModel::new(0.03, 1000, 11)).unwrap();
    let big = run_noisy(&cfg, &inputs(&[1, 1]), &NoiseModel::new(0.03, 2000, 11)).unwrap();
    let ratio = big.std_error.unwrap() / small.std_error.unwrap();
    assert!((ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.1, "ratio {ratio}");
}

#[test]
fn xor_mixed_inputs_agree() {
    let cfg = GateConfig::new(GateKind::Xor, 10, 50);
    let m = NoiseModel::new(0.03, 2000, 3);
    let a = run_noisy(&cfg, &inputs(&[0, 1]), &m).unwrap();
    let b = run_noisy(&cfg, &inputs(&[1, 0]), &m).unwrap();
    let se = (a.std_error.unwrap().powi(2) + b.std_error.unwrap().powi(2)).sqrt();
    assert!((a.e_d1.unwrap() - b.e_d1.unwrap()).abs() <= 2.0 * se);
}

#[test]
fn correct_output_degrades_with_gamma() {
    let cfg = GateConfig::new(GateKind::Nor, 8, 70);
    let rows = noise_sweep(&cfg, &[inputs(&[1, 1])], &[0.0, 0.01, 0.02, 0.03], &NoiseModel::new(0.0, 1000, 9)).unwrap();
    for w in rows.windows(2) {
        let slack = 2.0 * (w[0].std_error.unwrap().powi(2) + w[1].std_error.unwrap().powi(2)).sqrt();
        assert!(w[1].e_d0.unwrap() <= w[0].e_d0.unwrap() + slack);
    }
}
