//! Program generation, the combined report, and cross-checking of the
//! decision procedures. The `sirobust` binary is a thin wrapper around this
//! module.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::instrument::check_robustness_by_reduction;
use crate::ir::{parse_program, straight_line, validate_program, BinOp, Expr, InstrKind, Process, Program};
use crate::movers::{check_robustness_cdg, syntactic_robustness_check, ProofVerdict, RobustReason};
use crate::semantics::{event_to_json, EventJson};
use crate::traces::{check_robustness_enumerative, Witness};

/// Bounds for random program generation. Process count is drawn from
/// `2..=procs` (or is 1 when `procs == 1`); per-process transaction count and
/// per-transaction instruction count are drawn from `1..=max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenConfig {
    pub procs: usize,
    pub txns: usize,
    pub instrs: usize,
    pub vars: usize,
    pub domain: usize,
}

impl GenConfig {
    pub const fn new(procs: usize, txns: usize, instrs: usize, vars: usize, domain: usize) -> GenConfig {
        GenConfig { procs, txns, instrs, vars, domain }
    }
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig::new(3, 3, 3, 2, 2)
    }
}

const VAR_NAMES: [&str; 4] = ["x", "y", "z", "w"];

fn var_name(i: usize, n: usize) -> String {
    if n <= VAR_NAMES.len() {
        VAR_NAMES[i].to_string()
    } else {
        format!("x{i}")
    }
}

/// Deterministic random program for `seed`. Transactions are straight-line
/// sequences of reads, writes of constants or register expressions, and
/// occasional `assume` guards on registers.
pub fn generate_program(cfg: &GenConfig, seed: u64) -> Program {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nprocs = if cfg.procs <= 1 { 1 } else { rng.gen_range(2..=cfg.procs) };
    let nv = cfg.vars.max(1);
    let d = cfg.domain.max(2);
    let vars: Vec<String> = (0..nv).map(|i| var_name(i, nv)).collect();
    let mut processes = Vec::new();
    for pi in 0..nprocs {
        let nregs = rng.gen_range(1..=2usize);
        let regs: Vec<String> = (0..nregs).map(|k| format!("r{}{}", pi + 1, (b'a' + k as u8) as char)).collect();
        let ntx = rng.gen_range(1..=cfg.txns.max(1));
        let mut txns = Vec::new();
        for ti in 0..ntx {
            let ni = rng.gen_range(1..=cfg.instrs.max(1));
            let mut body = Vec::new();
            for k in 0..ni {
                let reg = rng.gen_range(0..nregs);
                let var = rng.gen_range(0..nv);
                let roll = rng.gen_range(0..16);
                let kind = if roll < 7 {
                    InstrKind::Read { reg, var }
                } else if roll < 15 || k == 0 {
                    let expr = match rng.gen_range(0..4) {
                        0 | 1 => Expr::Const(rng.gen_range(0..d) as u8),
                        2 => Expr::Reg(reg),
                        _ => Expr::bin(BinOp::Add, Expr::Reg(reg), Expr::Const(1)),
                    };
                    InstrKind::Write { var, expr }
                } else {
                    InstrKind::Assume(Expr::eq(Expr::Reg(reg), Expr::Const(rng.gen_range(0..d) as u8)))
                };
                body.push(kind);
            }
            txns.push(straight_line(&format!("t{}{}", pi + 1, ti + 1), body));
        }
        processes.push(Process { pid: format!("p{}", pi + 1), regs, txns });
    }
    Program { name: format!("gen_{seed}"), domain_size: d, vars, processes }
}

/// Version of the JSON report layout; see `schema/report.schema.json`.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Enum,
    Reduce,
    Cdg,
    All,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Method, String> {
        match s {
            "enum" => Ok(Method::Enum),
            "reduce" => Ok(Method::Reduce),
            "cdg" => Ok(Method::Cdg),
            "all" => Ok(Method::All),
            _ => Err(format!("unknown method `{s}` (expected enum, reduce, cdg, or all)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Robust,
    NonRobust,
    Unknown,
}

impl Verdict {
    /// Process exit code for this verdict.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Robust => 0,
            Verdict::NonRobust => 1,
            Verdict::Unknown => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckOptions {
    pub method: Method,
    /// Robustness notion used for the overall verdict of the enumerative
    /// method. Both notions are always reported.
    pub value_aware: bool,
    pub bound: Option<usize>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { method: Method::All, value_aware: false, bound: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub events: Vec<EventJson>,
    pub cycle: Vec<String>,
}

fn witness_report(p: &Program, w: &Witness) -> WitnessReport {
    WitnessReport {
        events: w.events.iter().map(|e| event_to_json(p, e)).collect(),
        cycle: w.cycle.iter().map(|t| t.name(p)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumReport {
    pub robust: bool,
    pub bound_hit: bool,
    pub states: usize,
    pub millis: f64,
    pub witness: Option<WitnessReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub robust: bool,
    pub bound_hit: bool,
    pub states: usize,
    pub instrumented_size: usize,
    pub millis: f64,
    pub attacker: Option<String>,
    pub helpers: Vec<String>,
    pub witness: Option<WitnessReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdgReport {
    pub proved: bool,
    pub truncated: bool,
    pub cycle: Option<String>,
    pub states: usize,
    pub m_edges: usize,
    pub millis: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub program: String,
    pub method: Method,
    pub value_aware: bool,
    pub bound: Option<usize>,
    pub verdict: Verdict,
    pub syntactic: Option<RobustReason>,
    pub enum_value_blind: Option<EnumReport>,
    pub enum_value_aware: Option<EnumReport>,
    pub reduction: Option<ReductionReport>,
    pub cdg: Option<CdgReport>,
    /// Violations of the cross-method consistency rules; empty when the
    /// methods agree.
    pub inconsistencies: Vec<String>,
}

fn millis(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1000.0
}

fn run_enum(p: &Program, value_aware: bool, bound: Option<usize>) -> EnumReport {
    let t = Instant::now();
    let r = check_robustness_enumerative(p, value_aware, bound);
    EnumReport {
        robust: r.robust,
        bound_hit: r.bound_hit,
        states: r.states,
        millis: millis(t),
        witness: r.witness.as_ref().map(|w| witness_report(p, w)),
    }
}

fn enum_verdict(r: &EnumReport) -> Verdict {
    match (r.robust, r.bound_hit) {
        (false, _) => Verdict::NonRobust,
        (true, false) => Verdict::Robust,
        (true, true) => Verdict::Unknown,
    }
}

/// Runs the requested methods. The overall verdict is non-robust if some
/// method found a violation of the selected notion, robust if some method
/// established robustness, and unknown otherwise.
pub fn check(p: &Program, opts: &CheckOptions) -> Report {
    let m = opts.method;
    let want = |x: Method| m == x || m == Method::All;
    let mut report = Report {
        schema_version: REPORT_SCHEMA_VERSION,
        program: p.name.clone(),
        method: m,
        value_aware: opts.value_aware,
        bound: opts.bound,
        verdict: Verdict::Unknown,
        syntactic: syntactic_robustness_check(p),
        enum_value_blind: None,
        enum_value_aware: None,
        reduction: None,
        cdg: None,
        inconsistencies: Vec::new(),
    };
    let mut votes = Vec::new();
    if want(Method::Enum) {
        let vb = run_enum(p, false, opts.bound);
        let va = run_enum(p, true, opts.bound);
        votes.push(enum_verdict(if opts.value_aware { &va } else { &vb }));
        report.enum_value_blind = Some(vb);
        report.enum_value_aware = Some(va);
    }
    if want(Method::Reduce) {
        let t = Instant::now();
        let r = check_robustness_by_reduction(p, opts.bound);
        // The reduction targets value-blind robustness, which implies the
        // value-aware notion but not conversely.
        votes.push(match (r.robust, r.bound_hit, opts.value_aware) {
            (false, _, false) => Verdict::NonRobust,
            (false, _, true) => Verdict::Unknown,
            (true, false, _) => Verdict::Robust,
            (true, true, _) => Verdict::Unknown,
        });
        report.reduction = Some(ReductionReport {
            robust: r.robust,
            bound_hit: r.bound_hit,
            states: r.states_explored,
            instrumented_size: r.instrumented_size,
            millis: millis(t),
            attacker: r.transcript.as_ref().map(|tr| tr.attacker.name(p)),
            helpers: r.transcript.as_ref().map(|tr| tr.helpers.iter().map(|h| h.name(p)).collect()).unwrap_or_default(),
            witness: r.witness.as_ref().map(|w| witness_report(p, w)),
        });
    }
    if want(Method::Cdg) {
        let t = Instant::now();
        let r = check_robustness_cdg(p, None);
        let cycle = match &r.verdict {
            ProofVerdict::Unknown { cycle: Some(c), .. } => Some(c.describe(p)),
            _ => None,
        };
        votes.push(if r.verdict.is_proved() { Verdict::Robust } else { Verdict::Unknown });
        report.cdg = Some(CdgReport {
            proved: r.verdict.is_proved(),
            truncated: r.graph.truncated,
            cycle,
            states: r.graph.states,
            m_edges: r.graph.m_edges().len(),
            millis: millis(t),
        });
    }
    if report.syntactic.is_some() {
        votes.push(Verdict::Robust);
    }
    report.verdict = if votes.contains(&Verdict::NonRobust) {
        Verdict::NonRobust
    } else if votes.contains(&Verdict::Robust) {
        Verdict::Robust
    } else {
        Verdict::Unknown
    };
    report.inconsistencies = inconsistencies(&report);
    report
}

/// Cross-method rules: the enumerative and reduction verdicts agree on
/// value-blind robustness, and a CDG proof or a syntactic reason implies
/// value-aware robustness (value-blind too, for the syntactic clauses).
/// Results cut by a bound are not compared.
pub fn inconsistencies(r: &Report) -> Vec<String> {
    let mut out = Vec::new();
    let exact = |e: &EnumReport| !e.bound_hit || !e.robust;
    if let (Some(e), Some(red)) = (&r.enum_value_blind, &r.reduction) {
        if exact(e) && !red.bound_hit && e.robust != red.robust {
            out.push(format!("enumerative robust={} but reduction robust={}", e.robust, red.robust));
        }
    }
    if let (Some(e), Some(c)) = (&r.enum_value_aware, &r.cdg) {
        if c.proved && !e.robust {
            out.push("CDG proved robustness but value-aware enumeration found a violation".into());
        }
    }
    if let (Some(e), Some(s)) = (&r.enum_value_blind, &r.syntactic) {
        if !e.robust {
            out.push(format!("syntactic check {s:?} but enumeration found a violation"));
        }
    }
    out
}

pub fn report_to_json(r: &Report) -> String {
    serde_json::to_string_pretty(r).expect("report serializes")
}

/// Short human-readable rendering of a report.
pub fn report_to_text(r: &Report) -> String {
    let mut s = format!("program {}\n", r.program);
    if let Some(reason) = &r.syntactic {
        let _ = writeln!(s, "syntactic: robust ({reason:?})");
    }
    let verdict = |robust: bool, bound_hit: bool| match (robust, bound_hit) {
        (false, _) => "non-robust",
        (true, false) => "robust",
        (true, true) => "robust within bound",
    };
    for (name, e) in [("enum (value-blind)", &r.enum_value_blind), ("enum (value-aware)", &r.enum_value_aware)] {
        if let Some(e) = e {
            let _ = write!(s, "{name}: {} [{} states, {:.1} ms]", verdict(e.robust, e.bound_hit), e.states, e.millis);
            if let Some(w) = &e.witness {
                let _ = write!(s, " cycle {{{}}}", w.cycle.join(", "));
            }
            s.push('\n');
        }
    }
    if let Some(red) = &r.reduction {
        let _ = write!(s, "reduce: {} [{} states, {} instrs, {:.1} ms]", verdict(red.robust, red.bound_hit), red.states, red.instrumented_size, red.millis);
        if let Some(a) = &red.attacker {
            let _ = write!(s, " attacker {a}, helpers [{}]", red.helpers.join(", "));
        }
        s.push('\n');
    }
    if let Some(c) = &r.cdg {
        let v = if c.proved { "proved" } else { "unknown" };
        let _ = write!(s, "cdg: {v} [{} states, {} m-edges, {:.1} ms]", c.states, c.m_edges, c.millis);
        if let Some(cy) = &c.cycle {
            let _ = write!(s, " non-mover cycle {cy}");
        }
        s.push('\n');
    }
    for i in &r.inconsistencies {
        let _ = writeln!(s, "INCONSISTENT: {i}");
    }
    let v = match r.verdict {
        Verdict::Robust => "robust",
        Verdict::NonRobust => "non-robust",
        Verdict::Unknown => "unknown",
    };
    let _ = writeln!(s, "verdict: {v}");
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrosscheckRow {
    pub name: String,
    pub enumerative: Option<bool>,
    pub reduction: Option<bool>,
    pub bound_hit: bool,
    pub agree: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrosscheckSummary {
    pub rows: Vec<CrosscheckRow>,
}

impl CrosscheckSummary {
    pub fn disagreements(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_none() && !r.agree).count()
    }

    pub fn errors(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn to_table(&self) -> String {
        let show = |b: Option<bool>| match b {
            Some(true) => "robust",
            Some(false) => "non-robust",
            None => "-",
        };
        let mut s = format!("{:<28} {:<11} {:<11} {}\n", "program", "enum", "reduce", "agree");
        for r in &self.rows {
            let agree = match (&r.error, r.agree) {
                (Some(e), _) => format!("error: {e}"),
                (None, true) if r.bound_hit => "yes (bound)".into(),
                (None, true) => "yes".into(),
                (None, false) => "NO".into(),
            };
            let _ = writeln!(s, "{:<28} {:<11} {:<11} {agree}", r.name, show(r.enumerative), show(r.reduction));
        }
        let ok = self.rows.len() - self.disagreements() - self.errors();
        let _ = writeln!(s, "{ok}/{} agree, {} disagree, {} errors", self.rows.len(), self.disagreements(), self.errors());
        s
    }
}

/// Compares the value-blind enumerative verdict with the reduction verdict
/// on one program.
pub fn crosscheck_program(name: &str, p: &Program, bound: Option<usize>) -> CrosscheckRow {
    let e = check_robustness_enumerative(p, false, bound);
    let r = check_robustness_by_reduction(p, bound);
    let bound_hit = e.bound_hit || r.bound_hit;
    CrosscheckRow {
        name: name.to_string(),
        enumerative: Some(e.robust),
        reduction: Some(r.robust),
        bound_hit,
        agree: e.robust == r.robust || bound_hit,
        error: None,
    }
}

/// Cross-checks every `.txn` file of `dir`, in file name order. Files that
/// fail to load are reported as errors, not aborted on.
pub fn crosscheck_dir(dir: &Path, bound: Option<usize>) -> std::io::Result<CrosscheckSummary> {
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txn"))
        .collect();
    files.sort();
    let mut rows = Vec::new();
    for f in files {
        let name = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let row = match load_program(&f) {
            Ok(p) => crosscheck_program(&name, &p, bound),
            Err(e) => CrosscheckRow { name, enumerative: None, reduction: None, bound_hit: false, agree: false, error: Some(e) },
        };
        rows.push(row);
    }
    Ok(CrosscheckSummary { rows })
}

/// Cross-checks `count` generated programs with seeds `seed..seed+count`.
pub fn crosscheck_generated(cfg: &GenConfig, seed: u64, count: u64, bound: Option<usize>) -> CrosscheckSummary {
    let rows = (seed..seed + count)
        .map(|s| {
            let p = generate_program(cfg, s);
            crosscheck_program(&p.name.clone(), &p, bound)
        })
        .collect();
    CrosscheckSummary { rows }
}

/// Reads, parses, and validates a program file; errors are rendered.
pub fn load_program(path: &Path) -> Result<Program, String> {
    let src = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let p = parse_program(&src).map_err(|e| format!("{}: {e}", path.display()))?;
    let diags = validate_program(&p);
    if let Some(d) = diags.first() {
        return Err(format!("{}: {d}", path.display()));
    }
    Ok(p)
}
