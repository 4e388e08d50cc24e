//! Line-oriented `.cfg` format for gate pipelines.
//!
//! ```text
//! # comment
//! gate x kind=xor M=32 N=1024
//! prep bob superpose 0.6 0.8
//! prep charlie e
//! prep david bit 1
//! stage x(bob,charlie) postselect output0
//! stage x(charlie,david) measure
//! ```
//!
//! Statements may appear in any order; stages run in file order. Every
//! declared gate and prepared party must be used.

use std::collections::HashMap;
use std::fmt;

use crate::entangle::{AtomState, Evaluation, Pipeline, PipelineResult, Port, Stage, StageAction};
use crate::error::{Error, Result};
use crate::gates::{GateConfig, GateKind};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    /// 1-based; 0 for whole-file problems.
    pub line: usize,
    /// 1-based character column; 0 when not tied to a token.
    pub column: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
        }
    }
}

/// Every problem found, in line order. A cross-reference failure reports
/// both ends where it can (an undeclared name at its use and an unused
/// declaration at its definition).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub diagnostics: Vec<Diagnostic>,
}

impl ParseError {
    pub fn first(&self) -> &Diagnostic {
        &self.diagnostics[0]
    }

    pub fn lines(&self) -> impl Iterator<Item = usize> + '_ {
        self.diagnostics.iter().map(|d| d.line)
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error: {}", self.first())?;
        if self.diagnostics.len() > 1 {
            write!(f, " (+{} more)", self.diagnostics.len() - 1)?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

#[derive(Clone, Debug, PartialEq)]
pub struct GateDecl {
    pub name: String,
    pub kind: GateKind,
    pub m: u32,
    pub n: u32,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Preparation {
    Ground,
    Excited,
    /// Real amplitudes of `|g>` and `|e>`.
    Superpose(f64, f64),
    Bit(bool),
}

impl Preparation {
    pub fn atom(self) -> AtomState {
        match self {
            Preparation::Ground => AtomState::ground(),
            Preparation::Excited => AtomState::excited(),
            Preparation::Superpose(g, e) => AtomState {
                amp_g: num_complex::Complex64::new(g, 0.0),
                amp_e: num_complex::Complex64::new(e, 0.0),
            },
            Preparation::Bit(b) => AtomState::classical(b),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageDecl {
    pub gate: String,
    pub parties: Vec<String>,
    pub action: StageAction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitProgram {
    pub gates: Vec<GateDecl>,
    pub preparations: Vec<(String, Preparation)>,
    pub stages: Vec<StageDecl>,
}

fn kind_keyword(kind: GateKind) -> String {
    match kind {
        GateKind::Nand2 => "nand".into(),
        other => other.name(),
    }
}

fn parse_kind(s: &str) -> Option<GateKind> {
    match s {
        "nand" => Some(GateKind::Nand2),
        "nand3" => Some(GateKind::NandMulti(3)),
        "nor" => Some(GateKind::Nor),
        "xor" => Some(GateKind::Xor),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Word(String),
    Punct(char),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    col: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '.' | '-' | '+')
}

fn lex(line: &str, lineno: usize) -> std::result::Result<Vec<Token>, Diagnostic> {
    let mut out = Vec::new();
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
        } else if matches!(c, '(' | ')' | ',' | '=') {
            out.push(Token { tok: Tok::Punct(c), col: i + 1 });
            i += 1;
        } else if is_word_char(c) {
            let start = i;
            while i < chars.len() && is_word_char(chars[i]) {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Word(chars[start..i].iter().collect()),
                col: start + 1,
            });
        } else {
            return Err(Diagnostic {
                line: lineno,
                column: i + 1,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

/// Token cursor over one line.
struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
    line: usize,
    end_col: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, col: usize, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            line: self.line,
            column: col,
            message: message.into(),
        }
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |t| t.col)
    }

    fn word(&mut self, what: &str) -> std::result::Result<(String, usize), Diagnostic> {
        match self.toks.get(self.pos) {
            Some(Token { tok: Tok::Word(w), col }) => {
                self.pos += 1;
                Ok((w.clone(), *col))
            }
            _ => Err(self.err(self.here(), format!("expected {what}"))),
        }
    }

    fn punct(&mut self, p: char) -> std::result::Result<(), Diagnostic> {
        match self.toks.get(self.pos) {
            Some(Token { tok: Tok::Punct(c), .. }) if *c == p => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(self.here(), format!("expected `{p}`"))),
        }
    }

    fn peek_punct(&self, p: char) -> bool {
        matches!(self.toks.get(self.pos), Some(Token { tok: Tok::Punct(c), .. }) if *c == p)
    }

    fn done(&self) -> std::result::Result<(), Diagnostic> {
        match self.toks.get(self.pos) {
            None => Ok(()),
            Some(t) => Err(self.err(t.col, "unexpected trailing input")),
        }
    }
}

fn is_name(s: &str) -> bool {
    let mut c = s.chars();
    matches!(c.next(), Some(ch) if ch.is_alphabetic() || ch == '_')
        && s.chars().all(|ch| ch.is_alphanumeric() || ch == '_')
}

fn name(cur: &mut Cursor, what: &str) -> std::result::Result<(String, usize), Diagnostic> {
    let (w, col) = cur.word(what)?;
    if is_name(&w) {
        Ok((w, col))
    } else {
        Err(cur.err(col, format!("`{w}` is not a valid {what}")))
    }
}

fn key_value(cur: &mut Cursor, key: &str) -> std::result::Result<(String, usize), Diagnostic> {
    let (k, col) = cur.word(&format!("`{key}=`"))?;
    if k != key {
        return Err(cur.err(col, format!("expected `{key}=`, found `{k}`")));
    }
    cur.punct('=')?;
    cur.word(&format!("value for `{key}`"))
}

fn int_value(cur: &mut Cursor, key: &str) -> std::result::Result<(u32, usize), Diagnostic> {
    let (v, col) = key_value(cur, key)?;
    v.parse::<u32>()
        .map(|x| (x, col))
        .map_err(|_| cur.err(col, format!("`{key}` must be a non-negative integer, got `{v}`")))
}

fn float(cur: &mut Cursor, what: &str) -> std::result::Result<f64, Diagnostic> {
    let (v, col) = cur.word(what)?;
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(cur.err(col, format!("{what} must be a number, got `{v}`"))),
    }
}

struct Located<T> {
    item: T,
    line: usize,
    col: usize,
}

#[derive(Default)]
struct Raw {
    gates: Vec<Located<GateDecl>>,
    preps: Vec<Located<(String, Preparation)>>,
    /// Stage, column of its gate name, column of each party.
    stages: Vec<(Located<StageDecl>, Vec<usize>)>,
}

fn parse_line(cur: &mut Cursor, raw: &mut Raw) -> std::result::Result<(), Diagnostic> {
    let (kw, kw_col) = cur.word("statement")?;
    let line = cur.line;
    match kw.as_str() {
        "gate" => {
            let (gname, col) = name(cur, "gate name")?;
            let (kind_s, kind_col) = key_value(cur, "kind")?;
            let kind = parse_kind(&kind_s)
                .ok_or_else(|| cur.err(kind_col, format!("unknown gate kind `{kind_s}` (nand, nand3, nor, xor)")))?;
            let (m, m_col) = int_value(cur, "M")?;
            let (n, n_col) = int_value(cur, "N")?;
            cur.done()?;
            if m < 2 {
                return Err(cur.err(m_col, format!("M must be >= 2, got {m}")));
            }
            if n < 2 {
                return Err(cur.err(n_col, format!("N must be >= 2, got {n}")));
            }
            raw.gates.push(Located {
                item: GateDecl { name: gname, kind, m, n },
                line,
                col,
            });
        }
        "prep" => {
            let (party, col) = name(cur, "party name")?;
            let (form, form_col) = cur.word("`g`, `e`, `superpose` or `bit`")?;
            let prep = match form.as_str() {
                "g" => Preparation::Ground,
                "e" => Preparation::Excited,
                "superpose" => {
                    let g = float(cur, "amplitude of |g>")?;
                    let e = float(cur, "amplitude of |e>")?;
                    let norm = g * g + e * e;
                    if (norm - 1.0).abs() > 1e-9 {
                        return Err(cur.err(form_col, format!("amplitudes not normalized (|g|^2+|e|^2 = {norm})")));
                    }
                    Preparation::Superpose(g, e)
                }
                "bit" => {
                    let (b, bcol) = cur.word("bit value")?;
                    match b.as_str() {
                        "0" => Preparation::Bit(false),
                        "1" => Preparation::Bit(true),
                        _ => return Err(cur.err(bcol, format!("bit must be 0 or 1, got `{b}`"))),
                    }
                }
                other => {
                    return Err(cur.err(form_col, format!("unknown preparation `{other}` (g, e, superpose, bit)")))
                }
            };
            cur.done()?;
            raw.preps.push(Located {
                item: (party, prep),
                line,
                col,
            });
        }
        "stage" => {
            let (gname, gcol) = name(cur, "gate name")?;
            cur.punct('(')?;
            let mut parties = Vec::new();
            let mut cols = Vec::new();
            loop {
                let (p, pcol) = name(cur, "party name")?;
                if parties.contains(&p) {
                    return Err(cur.err(pcol, format!("party `{p}` bound twice")));
                }
                parties.push(p);
                cols.push(pcol);
                if cur.peek_punct(',') {
                    cur.punct(',')?;
                } else {
                    break;
                }
            }
            cur.punct(')')?;
            let (act, act_col) = cur.word("`postselect` or `measure`")?;
            let action = match act.as_str() {
                "measure" => StageAction::Measure,
                "postselect" => {
                    let (port, pcol) = cur.word("port")?;
                    StageAction::Postselect(match port.as_str() {
                        "output0" => Port::Output0,
                        "output1" => Port::Output1,
                        _ => return Err(cur.err(pcol, format!("unknown port `{port}` (output0, output1)"))),
                    })
                }
                other => return Err(cur.err(act_col, format!("unknown stage action `{other}`"))),
            };
            cur.done()?;
            raw.stages.push((
                Located {
                    item: StageDecl { gate: gname, parties, action },
                    line,
                    col: gcol,
                },
                cols,
            ));
        }
        other => return Err(cur.err(kw_col, format!("unknown keyword `{other}` (gate, prep, stage)"))),
    }
    Ok(())
}

pub fn parse_program(text: &str) -> Result<CircuitProgram> {
    let mut raw = Raw::default();
    let mut diags = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let toks = match lex(line, lineno) {
            Ok(t) => t,
            Err(d) => {
                diags.push(d);
                continue;
            }
        };
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cursor {
            toks: &toks,
            pos: 0,
            line: lineno,
            end_col: line.chars().count() + 1,
        };
        if let Err(d) = parse_line(&mut cur, &mut raw) {
            diags.push(d);
        }
    }
    // Cross-references are only meaningful once every line parsed.
    if diags.is_empty() {
        validate(&raw, &mut diags);
    }
    if !diags.is_empty() {
        diags.sort_by_key(|d| (d.line, d.column));
        return Err(Error::Parse(ParseError { diagnostics: diags }));
    }
    Ok(CircuitProgram {
        gates: raw.gates.into_iter().map(|g| g.item).collect(),
        preparations: raw.preps.into_iter().map(|p| p.item).collect(),
        stages: raw.stages.into_iter().map(|(s, _)| s.item).collect(),
    })
}

fn validate(raw: &Raw, diags: &mut Vec<Diagnostic>) {
    let d = |line, column, message: String| Diagnostic { line, column, message };
    let mut gates: HashMap<&str, &Located<GateDecl>> = HashMap::new();
    for g in &raw.gates {
        if let Some(prev) = gates.insert(&g.item.name, g) {
            diags.push(d(g.line, g.col, format!("gate `{}` already declared on line {}", g.item.name, prev.line)));
            diags.push(d(prev.line, prev.col, format!("gate `{}` declared again on line {}", g.item.name, g.line)));
        }
    }
    let mut preps: HashMap<&str, &Located<(String, Preparation)>> = HashMap::new();
    for p in &raw.preps {
        if let Some(prev) = preps.insert(&p.item.0, p) {
            diags.push(d(p.line, p.col, format!("party `{}` already prepared on line {}", p.item.0, prev.line)));
            diags.push(d(prev.line, prev.col, format!("party `{}` prepared again on line {}", p.item.0, p.line)));
        }
    }
    if raw.stages.is_empty() {
        diags.push(d(0, 0, "no pipeline: at least one `stage` is required".into()));
    }
    let mut used_gates = std::collections::HashSet::new();
    let mut used_parties = std::collections::HashSet::new();
    let last = raw.stages.len().saturating_sub(1);
    for (i, (s, cols)) in raw.stages.iter().enumerate() {
        match gates.get(s.item.gate.as_str()) {
            None => diags.push(d(s.line, s.col, format!("undeclared gate `{}`", s.item.gate))),
            Some(g) => {
                used_gates.insert(g.item.name.as_str());
                let want = g.item.kind.parties();
                if s.item.parties.len() != want {
                    diags.push(d(
                        s.line,
                        s.col,
                        format!(
                            "gate `{}` ({}) takes {} controllers, got {}",
                            g.item.name,
                            kind_keyword(g.item.kind),
                            want,
                            s.item.parties.len()
                        ),
                    ));
                    diags.push(d(
                        g.line,
                        g.col,
                        format!("gate `{}` declared here with {} controllers", g.item.name, want),
                    ));
                }
            }
        }
        for (p, col) in s.item.parties.iter().zip(cols) {
            if preps.contains_key(p.as_str()) {
                used_parties.insert(p.as_str());
            } else {
                diags.push(d(s.line, *col, format!("party `{p}` has no `prep`")));
            }
        }
        if s.item.action == StageAction::Measure && i != last {
            diags.push(d(s.line, s.col, "`measure` is only allowed on the last stage".into()));
        }
    }
    for g in &raw.gates {
        if !used_gates.contains(g.item.name.as_str()) {
            diags.push(d(g.line, g.col, format!("gate `{}` is never used", g.item.name)));
        }
    }
    for p in &raw.preps {
        if !used_parties.contains(p.item.0.as_str()) {
            diags.push(d(p.line, p.col, format!("party `{}` is never used", p.item.0)));
        }
    }
}

/// Canonical text: gates, then preparations, then stages.
pub fn render_program(p: &CircuitProgram) -> String {
    let mut out = String::new();
    for g in &p.gates {
        out += &format!("gate {} kind={} M={} N={}\n", g.name, kind_keyword(g.kind), g.m, g.n);
    }
    for (party, prep) in &p.preparations {
        let form = match prep {
            Preparation::Ground => "g".to_string(),
            Preparation::Excited => "e".to_string(),
            Preparation::Superpose(g, e) => format!("superpose {g:?} {e:?}"),
            Preparation::Bit(b) => format!("bit {}", *b as u8),
        };
        out += &format!("prep {party} {form}\n");
    }
    for s in &p.stages {
        let action = match s.action {
            StageAction::Measure => "measure".to_string(),
            StageAction::Postselect(port) => format!("postselect {port}"),
        };
        out += &format!("stage {}({}) {}\n", s.gate, s.parties.join(","), action);
    }
    out
}

impl CircuitProgram {
    /// The equivalent pipeline; party order follows the `prep` lines.
    pub fn pipeline(&self) -> Result<Pipeline> {
        let stages = self
            .stages
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let g = self
                    .gates
                    .iter()
                    .find(|g| g.name == s.gate)
                    .ok_or_else(|| Error::Usage(format!("undeclared gate `{}`", s.gate)))?;
                Ok(Stage {
                    gate: GateConfig::new(g.kind, g.m, g.n),
                    parties: s.parties.clone(),
                    action: s.action,
                    failure: format!("D_F[{}]", i + 1),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let p = Pipeline {
            parties: self.preparations.iter().map(|(n, _)| n.clone()).collect(),
            stages,
            relabel_flip: false,
            target: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn atoms(&self) -> Vec<(String, AtomState)> {
        self.preparations.iter().map(|(n, p)| (n.clone(), p.atom())).collect()
    }
}

pub fn execute_program(p: &CircuitProgram, eval: Evaluation) -> Result<PipelineResult> {
    p.pipeline()?.run(&p.atoms(), eval)
}
