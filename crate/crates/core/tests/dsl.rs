use std::path::PathBuf;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use zeno_core::dsl::{execute_program, parse_program, render_program};
use zeno_core::entangle::{
    default_preparation, ghz_spec, w_spec, Evaluation, Port, Target,
};
use zeno_core::gates::{GateConfig, GateKind, GateNetwork, PartyInputs};
use zeno_core::Error;

fn program(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../programs").join(name);
    std::fs::read_to_string(path).unwrap()
}

/// Statement lines with comments and whitespace removed.
fn normalize(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap().split_whitespace().collect::<String>())
        .filter(|l| !l.is_empty())
        .collect()
}

#[test]
fn shipped_programs_round_trip() {
    for name in ["ghz.cfg", "w.cfg"] {
        let text = program(name);
        let p = parse_program(&text).unwrap();
        let rendered = render_program(&p);
        assert_eq!(parse_program(&rendered).unwrap(), p, "{name}");
        assert_eq!(normalize(&rendered), normalize(&text), "{name}");
    }
}

#[test]
fn shipped_programs_reach_ideal_values() {
    let ghz = execute_program(&parse_program(&program("ghz.cfg")).unwrap(), Evaluation::Ideal).unwrap();
    let out0 = ghz.port(Port::Output0).unwrap();
    assert_abs_diff_eq!(out0.probability, 0.25, epsilon = 1e-15);
    assert_abs_diff_eq!(out0.fidelities["ghz"], 1.0, epsilon = 1e-15);

    let w = execute_program(&parse_program(&program("w.cfg")).unwrap(), Evaluation::Ideal).unwrap();
    let out1 = w.port(Port::Output1).unwrap();
    assert_abs_diff_eq!(out1.probability, 0.375, epsilon = 1e-15);
    assert_abs_diff_eq!(out1.fidelities["w_flipped"], 1.0, epsilon = 1e-15);
}

#[test]
fn shipped_programs_match_pipeline_operations() {
    let prep = default_preparation();
    let ghz_prog = parse_program(&program("ghz.cfg")).unwrap();
    let m = ghz_prog.gates[0].m;
    let n = ghz_prog.gates[0].n;
    let via_dsl = execute_program(&ghz_prog, Evaluation::Exact).unwrap();
    let direct = ghz_spec(m, n).run(&prep, Evaluation::Exact).unwrap();
    let out0 = via_dsl.port(Port::Output0).unwrap();
    assert_eq!(out0.amplitudes, direct.postselected);
    assert_eq!(out0.probability, direct.success_probability);
    assert_eq!(Some(out0.fidelities["ghz"]), direct.fidelity);

    let w_prog = parse_program(&program("w.cfg")).unwrap();
    let via_dsl = execute_program(&w_prog, Evaluation::Exact).unwrap();
    let direct = w_spec(m, n).run(&prep, Evaluation::Exact).unwrap();
    let out1 = via_dsl.port(Port::Output1).unwrap();
    // The program reports the unflipped state; the pipeline relabels it, so
    // the sums run in a different order.
    assert_abs_diff_eq!(out1.probability, direct.success_probability, epsilon = 1e-15);
    assert_abs_diff_eq!(out1.fidelities["w_flipped"], direct.fidelity.unwrap(), epsilon = 1e-15);
    assert_abs_diff_eq!(Target::WFlipped.fidelity(&out1.amplitudes).unwrap(), direct.fidelity.unwrap(), epsilon = 1e-15);
}

#[test]
fn classical_program_matches_gate_run() {
    let text = "gate g kind=nor M=8 N=70\nprep bob bit 0\nprep charlie bit 1\nstage g(bob,charlie) measure\n";
    let r = execute_program(&parse_program(text).unwrap(), Evaluation::Exact).unwrap();
    let d = GateNetwork::build(&GateConfig::new(GateKind::Nor, 8, 70))
        .unwrap()
        .run(&PartyInputs::from_bits(&[0, 1]).unwrap())
        .unwrap();
    assert_eq!(r.port(Port::Output0).unwrap().probability, d.p_d0);
    assert_eq!(r.port(Port::Output1).unwrap().probability, d.p_d1);
}

#[test]
fn errors_carry_positions() {
    let err = parse_program("gate foo kind=xor M=4 N=16\nprep bob e\nstage foo(bob) measure\n").unwrap_err();
    let Error::Parse(e) = err else { panic!("{err}") };
    assert!(e.lines().any(|l| l == 3));
    assert!(e.to_string().contains("line 1") || e.to_string().contains("line 3"));
}

/// Character-level edits within one line. `#` and line breaks are left out:
/// they turn part of a line into a comment or split it, which changes which
/// line a problem belongs to.
fn corruption() -> impl Strategy<Value = (usize, usize, u8, char)> {
    let alphabet: Vec<char> = "abcdeg0123456789xyz_=(),. -+".chars().collect();
    (any::<usize>(), any::<usize>(), 0u8..3, prop::sample::select(alphabet))
}

fn corrupt(text: &str, (li, ci, kind, ch): (usize, usize, u8, char)) -> (String, usize) {
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let statement_lines: Vec<usize> = lines
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, _)| i)
        .collect();
    let target = statement_lines[li % statement_lines.len()];
    let mut chars: Vec<char> = lines[target].chars().collect();
    let pos = ci % (chars.len() + 1);
    match kind {
        0 => chars.insert(pos, ch),
        1 if pos < chars.len() => chars[pos] = ch,
        _ if pos < chars.len() => {
            chars.remove(pos);
        }
        _ => chars.push(ch),
    }
    lines[target] = chars.into_iter().collect();
    (lines.join("\n") + "\n", target + 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn corruption_is_localized(c in corruption(), which in 0usize..2) {
        let text = program(["ghz.cfg", "w.cfg"][which]);
        let (bad, line) = corrupt(&text, c);
        match parse_program(&bad) {
            Ok(_) => {}
            Err(Error::Parse(e)) => {
                prop_assert!(
                    e.lines().any(|l| l == line),
                    "corrupted line {} but diagnostics at {:?}\n{}",
                    line,
                    e.diagnostics,
                    bad
                );
            }
            Err(other) => prop_assert!(false, "unexpected error kind: {}", other),
        }
    }
}
