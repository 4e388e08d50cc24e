//! `zeno`: exact runs, sweep tables, noise curves, entanglement pipelines
//! and audits for the counterfactual gate simulator.
//!
//! Results go to stdout (or `--out`); diagnostics go to stderr.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use zeno_core::dsl::{execute_program, parse_program};
use zeno_core::entangle::{
    default_preparation, ghz_spec, w_spec, BranchAmplitude, Evaluation, PipelineResult, PortResult,
};
use zeno_core::gates::{
    all_inputs, counterfactual_audit, theory_prediction, GateConfig, GateKind, GateNetwork, PartyInputs,
};
use zeno_core::noise::{noise_sweep, NoiseModel, NoisePolicy};
use zeno_core::Error;

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "zeno", version, about = "Counterfactual logic gate simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one gate on one input assignment.
    Run(RunArgs),
    /// Tabulate exact and theory probabilities over an (M, N) grid.
    Sweep(SweepArgs),
    /// Monte Carlo effective probabilities under channel noise.
    Noise(NoiseArgs),
    /// GHZ or W preparation pipeline.
    Entangle(EntangleArgs),
    /// Absorber-substitution counterfactuality audit.
    Audit(AuditArgs),
    /// Execute a circuit description file.
    Exec(ExecArgs),
}

#[derive(Args)]
struct GateArgs {
    /// nand, nor, xor, or nandK for a K-party NAND.
    #[arg(long, value_parser = parse_gate)]
    gate: GateKind,
    #[arg(long)]
    m: u32,
    #[arg(long)]
    n: u32,
}

impl GateArgs {
    fn config(&self) -> Result<GateConfig> {
        let cfg = GateConfig::new(self.gate, self.m, self.n);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    gate: GateArgs,
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
    bob: u8,
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
    charlie: u8,
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
    david: Option<u8>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_parser = parse_gate)]
    gate: GateKind,
    /// Comma-separated M values.
    #[arg(long, value_delimiter = ',', required = true)]
    m_grid: Vec<u32>,
    /// Comma-separated N values.
    #[arg(long, value_delimiter = ',', required = true)]
    n_grid: Vec<u32>,
    /// `all`, or comma-separated bit strings such as `00,11`.
    #[arg(long, default_value = "all")]
    inputs: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NoiseArgs {
    #[command(flatten)]
    gate: GateArgs,
    /// Comma-separated loss probabilities.
    #[arg(long, value_delimiter = ',', required = true)]
    gamma_grid: Vec<f64>,
    #[arg(long, default_value_t = 2000)]
    samples: u32,
    #[arg(long, env = "ZENO_SEED", default_value_t = 2024)]
    seed: u64,
    /// per-arm (fresh draw per traversal) or per-unit.
    #[arg(long, default_value = "per-arm", value_parser = parse_policy)]
    policy: NoisePolicy,
    /// `all`, or comma-separated bit strings.
    #[arg(long, default_value = "all")]
    inputs: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum EntangledState {
    Ghz,
    W,
}

#[derive(Args)]
struct EntangleArgs {
    #[arg(long, value_enum)]
    state: EntangledState,
    #[arg(long, default_value_t = 32)]
    m: u32,
    #[arg(long, default_value_t = 1024)]
    n: u32,
    /// Use ideal gate maps instead of the finite network.
    #[arg(long)]
    ideal: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    gate: GateArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExecArgs {
    file: PathBuf,
    #[arg(long)]
    ideal: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_gate(s: &str) -> std::result::Result<GateKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_policy(s: &str) -> std::result::Result<NoisePolicy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Probabilities are reported to 6 decimal places.
fn r6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn p6(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json(v: &Value, out: Option<&Path>) -> Result<()> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    Ok(())
}

fn schema(kind: &str) -> String {
    format!("zeno.{kind}/v{SCHEMA_VERSION}")
}

fn parse_inputs(spec: &str, parties: usize) -> Result<Vec<PartyInputs>> {
    if spec == "all" {
        return all_inputs(parties)
            .iter()
            .map(|b| bits_to_inputs(b))
            .collect();
    }
    spec.split(',')
        .map(|s| {
            let s = s.trim();
            if s.len() != parties || !s.chars().all(|c| c == '0' || c == '1') {
                bail!("input `{s}` must be {parties} bits of 0/1");
            }
            let bits: Vec<u8> = s.bytes().map(|b| b - b'0').collect();
            Ok(PartyInputs::from_bits(&bits)?)
        })
        .collect()
}

fn bits_to_inputs(b: &[bool]) -> Result<PartyInputs> {
    Ok(PartyInputs::from_bits(&b.iter().map(|x| *x as u8).collect::<Vec<_>>())?)
}

/// Sweep/run CSV header: one `input_<party>` column per party.
fn run_header(parties: usize) -> Vec<String> {
    let mut h = vec!["M".to_string(), "N".to_string()];
    h.extend((0..parties).map(|r| format!("input_{}", zeno_core::gates::default_party_name(r))));
    h.extend(["P_D0", "P_D1", "theory_D0", "theory_D1"].map(String::from));
    h
}

fn run_row(cfg: &GateConfig, inputs: &PartyInputs, net: &GateNetwork) -> Result<Vec<String>> {
    let d = net.run(inputs)?;
    let t = theory_prediction(cfg, inputs)?;
    let mut row = vec![cfg.m.to_string(), cfg.n.to_string()];
    row.extend(inputs.bits.iter().map(|b| (*b as u8).to_string()));
    row.extend([p6(Some(d.p_d0)), p6(Some(d.p_d1)), p6(t.p_d0), p6(t.p_d1)]);
    Ok(row)
}

fn cmd_run(a: &RunArgs) -> Result<()> {
    let cfg = a.gate.config()?;
    let mut bits = vec![a.bob, a.charlie];
    bits.extend(a.david);
    if bits.len() != cfg.kind.parties() {
        bail!(
            "gate {} takes {} inputs, got {} (use --david only with nand3)",
            cfg.kind,
            cfg.kind.parties(),
            bits.len()
        );
    }
    let inputs = PartyInputs::from_bits(&bits)?;
    let net = GateNetwork::build(&cfg)?;
    if a.format == Format::Csv {
        let mut w = csv::Writer::from_writer(sink(a.out.as_deref())?);
        w.write_record(run_header(cfg.kind.parties()))?;
        w.write_record(run_row(&cfg, &inputs, &net)?)?;
        w.flush()?;
        return Ok(());
    }
    let d = net.run(&inputs)?;
    let t = theory_prediction(&cfg, &inputs)?;
    let gap = |exact: f64, theory: Option<f64>| theory.map(|th| r6(exact - th));
    let party_bits: BTreeMap<&str, u8> = inputs
        .parties
        .iter()
        .map(String::as_str)
        .zip(inputs.bits.iter().map(|b| *b as u8))
        .collect();
    let v = json!({
        "schema": schema("run"),
        "gate": cfg.kind.name(),
        "M": cfg.m,
        "N": cfg.n,
        "inputs": party_bits,
        "P_D0": r6(d.p_d0),
        "P_D1": r6(d.p_d1),
        "absorbed": d.absorbed.iter().map(|(k, v)| (k.clone(), r6(*v))).collect::<BTreeMap<_, _>>(),
        "theory": {
            "P_D0": t.p_d0.map(r6),
            "P_D1": t.p_d1.map(r6),
            "series_D0": t.series_d0.map(r6),
            "series_D1": t.series_d1.map(r6),
        },
        "gap": { "D0": gap(d.p_d0, t.p_d0), "D1": gap(d.p_d1, t.p_d1) },
        "well_conditioned": cfg.well_conditioned(),
    });
    emit_json(&v, a.out.as_deref())
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let parties = a.gate.parties();
    let inputs = parse_inputs(&a.inputs, parties)?;
    let mut w = csv::Writer::from_writer(sink(a.out.as_deref())?);
    w.write_record(run_header(parties))?;
    for &m in &a.m_grid {
        for &n in &a.n_grid {
            let cfg = GateConfig::new(a.gate, m, n);
            cfg.validate()?;
            let net = GateNetwork::build(&cfg)?;
            for inp in &inputs {
                w.write_record(run_row(&cfg, inp, &net)?)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_noise(a: &NoiseArgs) -> Result<()> {
    let cfg = a.gate.config()?;
    let inputs = parse_inputs(&a.inputs, cfg.kind.parties())?;
    let model = NoiseModel {
        gamma: 0.0,
        samples: a.samples,
        seed: a.seed,
        policy: a.policy,
    };
    model.validate()?;
    let rows = noise_sweep(&cfg, &inputs, &a.gamma_grid, &model)?;

    let mut w = csv::Writer::from_writer(sink(a.out.as_deref())?);
    let mut header = vec!["gamma".to_string()];
    for inp in &inputs {
        let b = inp.bits_string();
        header.extend([format!("E_{b}D0"), format!("E_{b}D1"), format!("SE_{b}")]);
    }
    w.write_record(&header)?;
    for chunk in rows.chunks(inputs.len()) {
        let mut rec = vec![format!("{}", chunk[0].gamma)];
        for r in chunk {
            rec.extend([p6(r.e_d0), p6(r.e_d1), p6(r.std_error)]);
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn amplitudes_json(amps: &[BranchAmplitude]) -> Value {
    Value::Array(
        amps.iter()
            .map(|b| json!({ "config": b.config, "re": b.amplitude.re, "im": b.amplitude.im }))
            .collect(),
    )
}

fn breakdown_json(r: &PipelineResult) -> BTreeMap<String, f64> {
    r.failure_breakdown.iter().map(|(k, v)| (k.clone(), r6(*v))).collect()
}

fn port_json(p: &PortResult) -> Value {
    json!({
        "port": p.port.to_string(),
        "probability": r6(p.probability),
        "amplitudes": amplitudes_json(&p.amplitudes),
        "fidelities": p.fidelities.iter().map(|(k, v)| (k.clone(), r6(*v))).collect::<BTreeMap<_, _>>(),
    })
}

fn cmd_entangle(a: &EntangleArgs) -> Result<()> {
    let (name, pipeline) = match a.state {
        EntangledState::Ghz => ("ghz", ghz_spec(a.m, a.n)),
        EntangledState::W => ("w", w_spec(a.m, a.n)),
    };
    let eval = if a.ideal { Evaluation::Ideal } else { Evaluation::Exact };
    let r = pipeline.run(&default_preparation(), eval)?;
    let v = json!({
        "schema": schema("entangle"),
        "state": name,
        "M": a.m,
        "N": a.n,
        "ideal": a.ideal,
        "success_probability": r6(r.success_probability),
        "fidelity": r.fidelity.map(r6),
        "target": r.target.map(|t| t.name()),
        "postselected_amplitudes": amplitudes_json(&r.postselected),
        "failure_breakdown": breakdown_json(&r),
    });
    emit_json(&v, a.out.as_deref())
}

fn cmd_audit(a: &AuditArgs) -> Result<()> {
    let cfg = a.gate.config()?;
    let mut reports = Vec::new();
    for b in all_inputs(cfg.kind.parties()) {
        let r = counterfactual_audit(&cfg, &bits_to_inputs(&b)?)?;
        reports.push(json!({
            "inputs": r.inputs,
            "max_deviation": r.max_deviation,
            "compared": r.compared,
            "substituted": r.substituted,
            "balanced_residuals": r.balanced_residuals,
            "max_balanced_residual": r.max_balanced_residual(),
        }));
    }
    let v = json!({
        "schema": schema("audit"),
        "gate": cfg.kind.name(),
        "M": cfg.m,
        "N": cfg.n,
        "reports": reports,
    });
    emit_json(&v, a.out.as_deref())
}

fn cmd_exec(a: &ExecArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.file).with_context(|| format!("cannot read {}", a.file.display()))?;
    let program = match parse_program(&text) {
        Ok(p) => p,
        Err(Error::Parse(e)) => {
            for d in &e.diagnostics {
                eprintln!("{}:{}:{}: {}", a.file.display(), d.line, d.column, d.message);
            }
            bail!("{} has {} error(s)", a.file.display(), e.diagnostics.len());
        }
        Err(other) => return Err(other.into()),
    };
    let eval = if a.ideal { Evaluation::Ideal } else { Evaluation::Exact };
    let r = execute_program(&program, eval)?;
    let v = json!({
        "schema": schema("exec"),
        "program": a.file.display().to_string(),
        "ideal": a.ideal,
        "success_probability": r6(r.success_probability),
        "postselected_amplitudes": amplitudes_json(&r.postselected),
        "measured": r.measured.iter().map(port_json).collect::<Vec<_>>(),
        "failure_breakdown": breakdown_json(&r),
    });
    emit_json(&v, a.out.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Noise(a) => cmd_noise(a),
        Command::Entangle(a) => cmd_entangle(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Exec(a) => cmd_exec(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
