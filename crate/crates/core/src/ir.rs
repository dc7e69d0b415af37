//! Program representation for transactional programs and its textual DSL.
//!
//! A program is a parallel composition of processes. Each process runs a
//! sequence of transactions, and each transaction is a labeled graph of
//! instructions starting at a `begin` and ending at a `commit`. A label may
//! carry several instructions and an instruction may name several `goto`
//! targets; both encode nondeterminism.
//!
//! The concrete syntax (file extension `.txn`):
//!
//! ```text
//! program ws
//! domain 2
//! vars x y
//!
//! process p1 regs r1
//!   txn t1
//!     l0: begin; goto l1;
//!     l1: r1 := y; goto l2;
//!     l2: x := 1; goto l3;
//!     l3: commit;
//! ```
//!
//! `goto` may be omitted, in which case control falls to the next line of the
//! same transaction. A `commit` without `goto` falls through to the next
//! transaction of the process; `commit; goto t1, t2;` jumps to the named
//! transactions instead. `end` is accepted as a synonym for `commit`, `=` for
//! `:=`, and `>`/`>=` are rewritten into `<`/`<=` with swapped operands.
//! Comments start with `//` or `#`.
//!
//! Values range over `0..domain_size` and arithmetic wraps modulo
//! `domain_size`. Every register and shared variable starts at 0.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Value = u8;
pub type VarId = usize;
pub type RegId = usize;
pub type LabelId = usize;

/// Reserved label name for the distinguished error location.
pub const ERROR_LABEL: &str = "error";

/// Largest supported domain; values are stored as `u8`.
pub const MAX_DOMAIN: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Eq,
    Ne,
    Lt,
    Le,
    And,
    Or,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le => 3,
            BinOp::Add | BinOp::Sub => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    Const(Value),
    Bool(bool),
    Reg(RegId),
    /// Nondeterministic value, written `*`.
    Nondet,
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExprType {
    Int,
    Bool,
}

impl Expr {
    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn eq(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Eq, a, b)
    }

    pub fn and(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::And, a, b)
    }

    pub fn or(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Or, a, b)
    }

    pub fn not(a: Expr) -> Expr {
        Expr::Not(Box::new(a))
    }

    /// Infers the type, or explains the first mismatch.
    pub fn type_of(&self) -> Result<ExprType, String> {
        match self {
            Expr::Const(_) | Expr::Reg(_) | Expr::Nondet => Ok(ExprType::Int),
            Expr::Bool(_) => Ok(ExprType::Bool),
            Expr::Not(a) => match a.type_of()? {
                ExprType::Bool => Ok(ExprType::Bool),
                ExprType::Int => Err("operand of `!` must be boolean".into()),
            },
            Expr::Bin(op, a, b) => {
                let (ta, tb) = (a.type_of()?, b.type_of()?);
                let (want, out) = match op {
                    BinOp::Add | BinOp::Sub => (ExprType::Int, ExprType::Int),
                    BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le => (ExprType::Int, ExprType::Bool),
                    BinOp::And | BinOp::Or => (ExprType::Bool, ExprType::Bool),
                };
                if ta != want || tb != want {
                    return Err(format!("operands of `{}` have the wrong type", op.symbol()));
                }
                Ok(out)
            }
        }
    }

    pub fn registers(&self, out: &mut BTreeSet<RegId>) {
        match self {
            Expr::Reg(r) => {
                out.insert(*r);
            }
            Expr::Bin(_, a, b) => {
                a.registers(out);
                b.registers(out);
            }
            Expr::Not(a) => a.registers(out),
            Expr::Const(_) | Expr::Bool(_) | Expr::Nondet => {}
        }
    }

    pub fn has_nondet(&self) -> bool {
        match self {
            Expr::Nondet => true,
            Expr::Bin(_, a, b) => a.has_nondet() || b.has_nondet(),
            Expr::Not(a) => a.has_nondet(),
            _ => false,
        }
    }

    /// All values an integer expression can take, sorted and deduplicated.
    pub fn eval_int(&self, regs: &[Value], domain: usize) -> Vec<Value> {
        let d = domain as u32;
        let mut out: Vec<Value> = match self {
            Expr::Const(c) => vec![((*c as u32) % d) as Value],
            Expr::Reg(r) => vec![regs[*r]],
            Expr::Nondet => (0..d).map(|v| v as Value).collect(),
            Expr::Bin(op @ (BinOp::Add | BinOp::Sub), a, b) => {
                let (va, vb) = (a.eval_int(regs, domain), b.eval_int(regs, domain));
                let mut acc = Vec::with_capacity(va.len() * vb.len());
                for &x in &va {
                    for &y in &vb {
                        let (x, y) = (x as u32, y as u32);
                        let v = match op {
                            BinOp::Add => (x + y) % d,
                            _ => (x + d - y % d) % d,
                        };
                        acc.push(v as Value);
                    }
                }
                acc
            }
            _ => panic!("eval_int on a boolean expression"),
        };
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Whether a boolean expression can evaluate to `true` and to `false`.
    pub fn eval_bool(&self, regs: &[Value], domain: usize) -> (bool, bool) {
        match self {
            Expr::Bool(b) => (*b, !*b),
            Expr::Not(a) => {
                let (t, f) = a.eval_bool(regs, domain);
                (f, t)
            }
            Expr::Bin(op @ (BinOp::And | BinOp::Or), a, b) => {
                let (at, af) = a.eval_bool(regs, domain);
                let (bt, bf) = b.eval_bool(regs, domain);
                if *op == BinOp::And {
                    (at && bt, af || bf)
                } else {
                    (at || bt, af && bf)
                }
            }
            Expr::Bin(op, a, b) => {
                let (va, vb) = (a.eval_int(regs, domain), b.eval_int(regs, domain));
                let (mut t, mut f) = (false, false);
                for &x in &va {
                    for &y in &vb {
                        let r = match op {
                            BinOp::Eq => x == y,
                            BinOp::Ne => x != y,
                            BinOp::Lt => x < y,
                            BinOp::Le => x <= y,
                            _ => unreachable!(),
                        };
                        t |= r;
                        f |= !r;
                    }
                }
                (t, f)
            }
            _ => panic!("eval_bool on an integer expression"),
        }
    }

    /// Deterministic evaluation; `None` if the expression contains `*`.
    pub fn eval_det(&self, regs: &[Value], domain: usize) -> Option<Value> {
        if self.has_nondet() {
            return None;
        }
        self.eval_int(regs, domain).first().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InstrKind {
    Begin,
    Commit,
    /// `reg := var`
    Read { reg: RegId, var: VarId },
    /// `var := expr`
    Write { var: VarId, expr: Expr },
    Assume(Expr),
    /// `reg := expr`, a purely local assignment. Read-free variants use it
    /// for `reg := *`.
    Assign { reg: RegId, expr: Expr },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Target {
    Label(LabelId),
    /// Entry of another transaction of the same process (commit only).
    Txn(usize),
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instruction {
    pub label: LabelId,
    pub kind: InstrKind,
    pub targets: Vec<Target>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transaction {
    pub tid: String,
    pub labels: Vec<String>,
    pub entry: LabelId,
    pub instrs: Vec<Instruction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Process {
    pub pid: String,
    pub regs: Vec<String>,
    pub txns: Vec<Transaction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Program {
    pub name: String,
    pub domain_size: usize,
    pub vars: Vec<String>,
    pub processes: Vec<Process>,
}

/// Static reference to a transaction: process index and position in it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TxnRef {
    pub proc: usize,
    pub txn: usize,
}

impl Transaction {
    /// Instructions carrying `label`, in declaration order.
    pub fn at(&self, label: LabelId) -> impl Iterator<Item = &Instruction> {
        self.instrs.iter().filter(move |i| i.label == label)
    }

    pub fn label_id(&self, name: &str) -> Option<LabelId> {
        self.labels.iter().position(|l| l == name)
    }

    /// Variables with a read instruction anywhere in the transaction.
    pub fn read_set(&self) -> BTreeSet<VarId> {
        self.instrs
            .iter()
            .filter_map(|i| match i.kind {
                InstrKind::Read { var, .. } => Some(var),
                _ => None,
            })
            .collect()
    }

    /// Variables with a write instruction anywhere in the transaction.
    pub fn write_set(&self) -> BTreeSet<VarId> {
        self.instrs
            .iter()
            .filter_map(|i| match i.kind {
                InstrKind::Write { var, .. } => Some(var),
                _ => None,
            })
            .collect()
    }

    pub fn access_count(&self) -> usize {
        self.instrs
            .iter()
            .filter(|i| matches!(i.kind, InstrKind::Read { .. } | InstrKind::Write { .. }))
            .count()
    }

    /// Labels reachable from the entry along intra-transaction gotos.
    pub fn reachable_labels(&self) -> BTreeSet<LabelId> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![self.entry];
        while let Some(l) = stack.pop() {
            if !seen.insert(l) {
                continue;
            }
            for i in self.at(l) {
                for t in &i.targets {
                    if let Target::Label(n) = t {
                        stack.push(*n);
                    }
                }
            }
        }
        seen
    }
}

impl Program {
    pub fn empty(name: &str) -> Program {
        Program { name: name.to_string(), domain_size: 2, vars: Vec::new(), processes: Vec::new() }
    }

    pub fn txn(&self, r: TxnRef) -> &Transaction {
        &self.processes[r.proc].txns[r.txn]
    }

    pub fn txn_refs(&self) -> Vec<TxnRef> {
        let mut out = Vec::new();
        for (p, proc_) in self.processes.iter().enumerate() {
            for t in 0..proc_.txns.len() {
                out.push(TxnRef { proc: p, txn: t });
            }
        }
        out
    }

    pub fn txn_count(&self) -> usize {
        self.processes.iter().map(|p| p.txns.len()).sum()
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v == name)
    }

    pub fn proc_id(&self, pid: &str) -> Option<usize> {
        self.processes.iter().position(|p| p.pid == pid)
    }

    pub fn find_txn(&self, tid: &str) -> Option<TxnRef> {
        self.txn_refs().into_iter().find(|r| self.txn(*r).tid == tid)
    }

    pub fn tid(&self, r: TxnRef) -> &str {
        &self.txn(r).tid
    }

    /// Total number of instructions, used to check the instrumentation size.
    pub fn instr_count(&self) -> usize {
        self.processes.iter().flat_map(|p| &p.txns).map(|t| t.instrs.len()).sum()
    }

    /// Transactions that may follow `from` in its process, counting
    /// fall-through and commit gotos.
    pub fn successors_of(&self, from: TxnRef) -> BTreeSet<usize> {
        let proc_ = &self.processes[from.proc];
        let mut out = BTreeSet::new();
        for i in &proc_.txns[from.txn].instrs {
            if i.kind == InstrKind::Commit {
                if i.targets.is_empty() {
                    if from.txn + 1 < proc_.txns.len() {
                        out.insert(from.txn + 1);
                    }
                } else {
                    for t in &i.targets {
                        if let Target::Txn(n) = t {
                            out.insert(*n);
                        }
                    }
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagKind {
    DomainTooSmall(usize),
    DomainTooLarge(usize),
    DuplicatePid(String),
    DuplicateTid(String),
    DuplicateVariable(String),
    DuplicateRegister(String),
    DuplicateLabel(String),
    UndeclaredVariable(String),
    UndeclaredRegister(String),
    UnknownLabel(String),
    EntryNotBegin,
    NestedBegin,
    MissingCommitPath,
    MissingTargets,
    BadCommitTarget,
    ErrorTargetOnCommit,
    TypeError(String),
    EmptyTransaction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagKind,
    /// `pid/tid/label` path to the offending element (may be partial).
    pub location: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}", self.kind, self.location)
    }
}

/// Checks every structural invariant and returns one diagnostic per
/// violation; an empty list means the program is well formed.
pub fn validate_program(p: &Program) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut diag = |kind: DiagKind, location: String| out.push(Diagnostic { kind, location });

    if p.domain_size < 2 {
        diag(DiagKind::DomainTooSmall(p.domain_size), "program".into());
    }
    if p.domain_size > MAX_DOMAIN {
        diag(DiagKind::DomainTooLarge(p.domain_size), "program".into());
    }
    let mut seen = BTreeSet::new();
    for v in &p.vars {
        if !seen.insert(v.as_str()) {
            diag(DiagKind::DuplicateVariable(v.clone()), "vars".into());
        }
    }
    let mut pids = BTreeSet::new();
    let mut tids = BTreeSet::new();
    for proc_ in &p.processes {
        if !pids.insert(proc_.pid.as_str()) {
            diag(DiagKind::DuplicatePid(proc_.pid.clone()), proc_.pid.clone());
        }
        let mut regs = BTreeSet::new();
        for r in &proc_.regs {
            if !regs.insert(r.as_str()) {
                diag(DiagKind::DuplicateRegister(r.clone()), proc_.pid.clone());
            }
        }
        for t in &proc_.txns {
            let tloc = format!("{}/{}", proc_.pid, t.tid);
            if !tids.insert(t.tid.as_str()) {
                diag(DiagKind::DuplicateTid(t.tid.clone()), tloc.clone());
            }
            if t.instrs.is_empty() {
                diag(DiagKind::EmptyTransaction, tloc.clone());
                continue;
            }
            let mut labels = BTreeSet::new();
            for l in &t.labels {
                if !labels.insert(l.as_str()) {
                    diag(DiagKind::DuplicateLabel(l.clone()), tloc.clone());
                }
            }
            let label_name = |l: LabelId| t.labels.get(l).cloned().unwrap_or_else(|| format!("#{l}"));
            if t.entry >= t.labels.len() {
                diag(DiagKind::UnknownLabel(format!("#{}", t.entry)), tloc.clone());
                continue;
            }
            let entry_instrs: Vec<_> = t.at(t.entry).collect();
            if entry_instrs.is_empty() || entry_instrs.iter().any(|i| i.kind != InstrKind::Begin) {
                diag(DiagKind::EntryNotBegin, format!("{tloc}/{}", label_name(t.entry)));
            }
            for i in &t.instrs {
                let loc = format!("{tloc}/{}", label_name(i.label));
                if i.label >= t.labels.len() {
                    diag(DiagKind::UnknownLabel(format!("#{}", i.label)), loc.clone());
                }
                if i.kind == InstrKind::Begin && i.label != t.entry {
                    diag(DiagKind::NestedBegin, loc.clone());
                }
                let check_reg = |r: RegId, d: &mut dyn FnMut(DiagKind, String)| {
                    if r >= proc_.regs.len() {
                        d(DiagKind::UndeclaredRegister(format!("#{r}")), loc.clone());
                    }
                };
                let check_expr = |e: &Expr, want: ExprType, d: &mut dyn FnMut(DiagKind, String)| {
                    let mut rs = BTreeSet::new();
                    e.registers(&mut rs);
                    for r in rs {
                        if r >= proc_.regs.len() {
                            d(DiagKind::UndeclaredRegister(format!("#{r}")), loc.clone());
                        }
                    }
                    match e.type_of() {
                        Ok(t) if t == want => {}
                        Ok(_) => d(DiagKind::TypeError(format!("expected {want:?} expression")), loc.clone()),
                        Err(m) => d(DiagKind::TypeError(m), loc.clone()),
                    }
                };
                match &i.kind {
                    InstrKind::Read { reg, var } => {
                        check_reg(*reg, &mut diag);
                        if *var >= p.vars.len() {
                            diag(DiagKind::UndeclaredVariable(format!("#{var}")), loc.clone());
                        }
                    }
                    InstrKind::Write { var, expr } => {
                        if *var >= p.vars.len() {
                            diag(DiagKind::UndeclaredVariable(format!("#{var}")), loc.clone());
                        }
                        check_expr(expr, ExprType::Int, &mut diag);
                    }
                    InstrKind::Assign { reg, expr } => {
                        check_reg(*reg, &mut diag);
                        check_expr(expr, ExprType::Int, &mut diag);
                    }
                    InstrKind::Assume(e) => check_expr(e, ExprType::Bool, &mut diag),
                    InstrKind::Begin | InstrKind::Commit => {}
                }
                if i.kind == InstrKind::Commit {
                    for tg in &i.targets {
                        match tg {
                            Target::Txn(n) if *n < proc_.txns.len() => {}
                            Target::Error => diag(DiagKind::ErrorTargetOnCommit, loc.clone()),
                            _ => diag(DiagKind::BadCommitTarget, loc.clone()),
                        }
                    }
                } else {
                    if i.targets.is_empty() {
                        diag(DiagKind::MissingTargets, loc.clone());
                    }
                    for tg in &i.targets {
                        match tg {
                            Target::Label(n) if *n < t.labels.len() => {}
                            Target::Label(n) => diag(DiagKind::UnknownLabel(format!("#{n}")), loc.clone()),
                            Target::Txn(_) => diag(DiagKind::BadCommitTarget, loc.clone()),
                            Target::Error => {}
                        }
                    }
                }
            }
            // Every reachable label must be able to reach a commit. The error
            // location counts as an exit.
            let reach = t.reachable_labels();
            let mut can_exit: BTreeSet<LabelId> = t
                .instrs
                .iter()
                .filter(|i| i.kind == InstrKind::Commit || i.targets.contains(&Target::Error))
                .map(|i| i.label)
                .collect();
            loop {
                let before = can_exit.len();
                for i in &t.instrs {
                    if i.targets.iter().any(|tg| matches!(tg, Target::Label(n) if can_exit.contains(n))) {
                        can_exit.insert(i.label);
                    }
                }
                if can_exit.len() == before {
                    break;
                }
            }
            for l in reach {
                if l < t.labels.len() && !can_exit.contains(&l) {
                    diag(DiagKind::MissingCommitPath, format!("{tloc}/{}", label_name(l)));
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Printing

fn write_expr(out: &mut String, e: &Expr, p: &Process, parent_prec: u8) {
    match e {
        Expr::Const(c) => write!(out, "{c}").unwrap(),
        Expr::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Expr::Reg(r) => out.push_str(&p.regs[*r]),
        Expr::Nondet => out.push('*'),
        Expr::Not(a) => {
            out.push('!');
            write_expr(out, a, p, 5);
        }
        Expr::Bin(op, a, b) => {
            let prec = op.precedence();
            let paren = prec <= parent_prec;
            if paren {
                out.push('(');
            }
            // Left operand may share the precedence level (left-assoc);
            // the right one may not.
            write_expr(out, a, p, prec - 1);
            write!(out, " {} ", op.symbol()).unwrap();
            write_expr(out, b, p, prec);
            if paren {
                out.push(')');
            }
        }
    }
}

pub fn expr_to_string(e: &Expr, p: &Process) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, p, 0);
    s
}

fn target_name(t: &Target, txn: &Transaction, proc_: &Process) -> String {
    match t {
        Target::Label(l) => txn.labels[*l].clone(),
        Target::Txn(n) => proc_.txns[*n].tid.clone(),
        Target::Error => ERROR_LABEL.to_string(),
    }
}

pub fn instr_to_string(prog: &Program, proc_: &Process, txn: &Transaction, i: &Instruction) -> String {
    let mut s = format!("{}: ", txn.labels[i.label]);
    match &i.kind {
        InstrKind::Begin => s.push_str("begin"),
        InstrKind::Commit => s.push_str("commit"),
        InstrKind::Read { reg, var } => write!(s, "{} := {}", proc_.regs[*reg], prog.vars[*var]).unwrap(),
        InstrKind::Write { var, expr } => {
            write!(s, "{} := {}", prog.vars[*var], expr_to_string(expr, proc_)).unwrap()
        }
        InstrKind::Assign { reg, expr } => {
            write!(s, "{} := {}", proc_.regs[*reg], expr_to_string(expr, proc_)).unwrap()
        }
        InstrKind::Assume(e) => write!(s, "assume {}", expr_to_string(e, proc_)).unwrap(),
    }
    s.push(';');
    if !i.targets.is_empty() {
        let names: Vec<String> = i.targets.iter().map(|t| target_name(t, txn, proc_)).collect();
        write!(s, " goto {};", names.join(", ")).unwrap();
    }
    s
}

/// Deterministic pretty-printer; `parse_program(&print_program(p)) == p`
/// for every program produced by the parser or the library.
pub fn print_program(p: &Program) -> String {
    let mut s = String::new();
    if p.name.is_empty() {
        s.push_str("program\n");
    } else {
        writeln!(s, "program {}", p.name).unwrap();
    }
    writeln!(s, "domain {}", p.domain_size).unwrap();
    if !p.vars.is_empty() {
        writeln!(s, "vars {}", p.vars.join(" ")).unwrap();
    }
    for proc_ in &p.processes {
        s.push('\n');
        write!(s, "process {}", proc_.pid).unwrap();
        if !proc_.regs.is_empty() {
            write!(s, " regs {}", proc_.regs.join(" ")).unwrap();
        }
        s.push('\n');
        for t in &proc_.txns {
            writeln!(s, "  txn {}", t.tid).unwrap();
            if t.entry != 0 {
                writeln!(s, "    entry {}", t.labels[t.entry]).unwrap();
            }
            // Labels without instructions still need to be declared so that
            // label ids survive a round trip.
            for (l, name) in t.labels.iter().enumerate() {
                if !t.instrs.iter().any(|i| i.label == l) {
                    writeln!(s, "    label {name}").unwrap();
                }
            }
            for i in &t.instrs {
                writeln!(s, "    {}", instr_to_string(p, proc_, t, i)).unwrap();
            }
        }
    }
    s
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("invalid program: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Semantic(Vec<Diagnostic>),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(u64),
    Sym(&'static str),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: [&str; 20] = [
    ":=", "==", "!=", "<=", ">=", "&&", "||", ":", ";", ",", "=", "<", ">", "+", "-", "!", "(", ")", "*", "@",
];

const KEYWORDS: [&str; 13] =
    ["program", "domain", "vars", "process", "regs", "txn", "begin", "commit", "end", "goto", "assume", "entry", "label"];

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '@'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '\'' | '@' | '$')
}

fn tokenize(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    for (ln, line) in src.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
                break;
            }
            if is_ident_start(c) {
                let start = i;
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                out.push(Spanned { tok: Tok::Ident(word), line: ln + 1, col });
                continue;
            }
            if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let n = word.parse::<u64>().map_err(|_| ParseError::Syntax {
                    line: ln + 1,
                    col,
                    msg: format!("integer literal `{word}` out of range"),
                })?;
                out.push(Spanned { tok: Tok::Int(n), line: ln + 1, col });
                continue;
            }
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                Some(s) => {
                    out.push(Spanned { tok: Tok::Sym(s), line: ln + 1, col });
                    i += s.len();
                }
                None => {
                    return Err(ParseError::Syntax { line: ln + 1, col, msg: format!("unexpected character `{c}`") })
                }
            }
        }
    }
    Ok(out)
}

/// Unresolved goto target, kept by name until the enclosing scope is known.
struct PendingInstr {
    label: LabelId,
    kind: InstrKind,
    targets: Option<Vec<(String, usize, usize)>>,
    line: usize,
    col: usize,
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    eof_line: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        match self.toks.get(self.pos) {
            Some(s) => (s.line, s.col),
            None => (self.eof_line, 1),
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError::Syntax { line, col, msg: msg.into() })
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(w)) if w == kw)
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.is_sym(s) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.is_kw(kw) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{kw}`"))
        }
    }

    fn name(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(w)) if !KEYWORDS.contains(&w.as_str()) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => self.err(format!("expected {what}")),
        }
    }

    /// Whether the next tokens start a new item (keyword or `label:`).
    fn at_item_start(&self) -> bool {
        match self.peek() {
            None => true,
            Some(Tok::Ident(w)) if KEYWORDS.contains(&w.as_str()) => true,
            Some(Tok::Ident(_)) => matches!(self.peek_at(1), Some(Tok::Sym(":"))),
            _ => false,
        }
    }

    fn names_until_item(&mut self, what: &str) -> Result<Vec<String>, ParseError> {
        let mut out = Vec::new();
        while !self.at_item_start() {
            out.push(self.name(what)?);
        }
        Ok(out)
    }

    fn int(&mut self) -> Result<u64, ParseError> {
        match self.peek() {
            Some(Tok::Int(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            _ => self.err("expected integer"),
        }
    }

    // Expression grammar, loosest first:
    //   or := and ('||' and)*
    //   and := unary ('&&' unary)*
    //   unary := '!' unary | cmp
    //   cmp := add (cmpop add)?
    //   add := atom (('+'|'-') atom)*
    //   atom := INT | true | false | '*' | reg | '(' or ')'
    fn expr(&mut self, regs: &[String], domain: usize) -> Result<Expr, ParseError> {
        let mut e = self.and_expr(regs, domain)?;
        while self.is_sym("||") {
            self.pos += 1;
            let r = self.and_expr(regs, domain)?;
            e = Expr::or(e, r);
        }
        Ok(e)
    }

    fn and_expr(&mut self, regs: &[String], domain: usize) -> Result<Expr, ParseError> {
        let mut e = self.unary(regs, domain)?;
        while self.is_sym("&&") {
            self.pos += 1;
            let r = self.unary(regs, domain)?;
            e = Expr::and(e, r);
        }
        Ok(e)
    }

    fn unary(&mut self, regs: &[String], domain: usize) -> Result<Expr, ParseError> {
        if self.is_sym("!") {
            self.pos += 1;
            let e = self.unary(regs, domain)?;
            return Ok(Expr::not(e));
        }
        self.cmp(regs, domain)
    }

    fn cmp(&mut self, regs: &[String], domain: usize) -> Result<Expr, ParseError> {
        let a = self.add(regs, domain)?;
        let op = match self.peek() {
            Some(Tok::Sym(s)) if matches!(*s, "==" | "!=" | "<" | "<=" | ">" | ">=") => *s,
            _ => return Ok(a),
        };
        self.pos += 1;
        let b = self.add(regs, domain)?;
        Ok(match op {
            "==" => Expr::bin(BinOp::Eq, a, b),
            "!=" => Expr::bin(BinOp::Ne, a, b),
            "<" => Expr::bin(BinOp::Lt, a, b),
            "<=" => Expr::bin(BinOp::Le, a, b),
            ">" => Expr::bin(BinOp::Lt, b, a),
            _ => Expr::bin(BinOp::Le, b, a),
        })
    }

    fn add(&mut self, regs: &[String], domain: usize) -> Result<Expr, ParseError> {
        let mut e = self.atom(regs, domain)?;
        loop {
            let op = if self.is_sym("+") {
                BinOp::Add
            } else if self.is_sym("-") {
                BinOp::Sub
            } else {
                return Ok(e);
            };
            self.pos += 1;
            let r = self.atom(regs, domain)?;
            e = Expr::bin(op, e, r);
        }
    }

    fn atom(&mut self, regs: &[String], domain: usize) -> Result<Expr, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Int(n)) => {
                if n as usize >= domain {
                    return self.err(format!("constant {n} outside domain 0..{domain}"));
                }
                self.pos += 1;
                Ok(Expr::Const(n as Value))
            }
            Some(Tok::Sym("*")) => {
                self.pos += 1;
                Ok(Expr::Nondet)
            }
            Some(Tok::Sym("(")) => {
                self.pos += 1;
                let e = self.expr(regs, domain)?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Some(Tok::Ident(w)) if w == "true" || w == "false" => {
                self.pos += 1;
                Ok(Expr::Bool(w == "true"))
            }
            Some(Tok::Ident(w)) => match regs.iter().position(|r| *r == w) {
                Some(r) => {
                    self.pos += 1;
                    Ok(Expr::Reg(r))
                }
                None => self.err(format!("`{w}` is not a register of this process")),
            },
            _ => self.err("expected expression"),
        }
    }
}

/// Parses DSL source into a validated program.
pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let toks = tokenize(src)?;
    let eof_line = src.lines().count().max(1);
    let mut ps = Parser { toks, pos: 0, eof_line };

    ps.expect_kw("program")?;
    let mut prog = Program::empty("");
    if !ps.at_item_start() {
        prog.name = ps.name("program name")?;
    }
    if ps.is_kw("domain") {
        ps.pos += 1;
        let d = ps.int()?;
        if d < 2 || d as usize > MAX_DOMAIN {
            return ps.err(format!("domain must be in 2..={MAX_DOMAIN}"));
        }
        prog.domain_size = d as usize;
    }
    if ps.is_kw("vars") {
        ps.pos += 1;
        prog.vars = ps.names_until_item("variable name")?;
    }

    while ps.peek().is_some() {
        ps.expect_kw("process")?;
        let pid = ps.name("process id")?;
        let mut regs = Vec::new();
        if ps.is_kw("regs") {
            ps.pos += 1;
            regs = ps.names_until_item("register name")?;
        }
        let mut proc_ = Process { pid, regs, txns: Vec::new() };
        // Commit targets name transactions, resolved once the process ends.
        let mut commit_fixups: Vec<(usize, usize, Vec<(String, usize, usize)>)> = Vec::new();
        while ps.is_kw("txn") {
            ps.pos += 1;
            let tid = ps.name("transaction id")?;
            let (txn, fix) = parse_txn(&mut ps, &prog, &proc_, tid)?;
            let t_idx = proc_.txns.len();
            for (i_idx, names) in fix {
                commit_fixups.push((t_idx, i_idx, names));
            }
            proc_.txns.push(txn);
        }
        for (t_idx, i_idx, names) in commit_fixups {
            let mut targets = Vec::new();
            for (n, line, col) in names {
                match proc_.txns.iter().position(|t| t.tid == n) {
                    Some(k) => targets.push(Target::Txn(k)),
                    None => {
                        return Err(ParseError::Syntax {
                            line,
                            col,
                            msg: format!("commit target `{n}` is not a transaction of process {}", proc_.pid),
                        })
                    }
                }
            }
            proc_.txns[t_idx].instrs[i_idx].targets = targets;
        }
        prog.processes.push(proc_);
    }

    let diags = validate_program(&prog);
    if diags.is_empty() {
        Ok(prog)
    } else {
        Err(ParseError::Semantic(diags))
    }
}

type CommitFixups = Vec<(usize, Vec<(String, usize, usize)>)>;

fn parse_txn(
    ps: &mut Parser,
    prog: &Program,
    proc_: &Process,
    tid: String,
) -> Result<(Transaction, CommitFixups), ParseError> {
    let mut labels: Vec<String> = Vec::new();
    let intern = |labels: &mut Vec<String>, name: &str| match labels.iter().position(|l| l == name) {
        Some(i) => i,
        None => {
            labels.push(name.to_string());
            labels.len() - 1
        }
    };
    let mut entry_name: Option<String> = None;
    let mut pending: Vec<PendingInstr> = Vec::new();
    loop {
        if ps.is_kw("entry") {
            ps.pos += 1;
            let n = ps.name("label")?;
            intern(&mut labels, &n);
            entry_name = Some(n);
            continue;
        }
        if ps.is_kw("label") {
            ps.pos += 1;
            let n = ps.name("label")?;
            intern(&mut labels, &n);
            continue;
        }
        let is_label = matches!(ps.peek(), Some(Tok::Ident(w)) if !KEYWORDS.contains(&w.as_str()))
            && matches!(ps.peek_at(1), Some(Tok::Sym(":")));
        if !is_label {
            break;
        }
        let (line, col) = ps.here();
        let lname = ps.name("label")?;
        if lname == ERROR_LABEL {
            return ps.err("`error` is a reserved label");
        }
        ps.expect_sym(":")?;
        let label = intern(&mut labels, &lname);
        let kind = parse_instr(ps, prog, proc_)?;
        ps.expect_sym(";")?;
        let mut targets = None;
        if ps.is_kw("goto") {
            ps.pos += 1;
            let mut names = Vec::new();
            loop {
                let (l, c) = ps.here();
                let n = match ps.peek() {
                    Some(Tok::Ident(w)) if !KEYWORDS.contains(&w.as_str()) => w.clone(),
                    _ => return ps.err("expected goto target"),
                };
                ps.pos += 1;
                names.push((n, l, c));
                if ps.is_sym(",") {
                    ps.pos += 1;
                } else {
                    break;
                }
            }
            ps.expect_sym(";")?;
            targets = Some(names);
        }
        pending.push(PendingInstr { label, kind, targets, line, col });
    }
    if pending.is_empty() {
        return ps.err(format!("transaction {tid} has no instructions"));
    }
    let entry = match entry_name {
        Some(n) => labels.iter().position(|l| *l == n).unwrap(),
        None => pending[0].label,
    };

    let mut instrs = Vec::new();
    let mut fixups = Vec::new();
    for (k, pi) in pending.iter().enumerate() {
        let is_commit = pi.kind == InstrKind::Commit;
        let targets = match (&pi.targets, is_commit) {
            (Some(names), true) => {
                fixups.push((k, names.clone()));
                Vec::new()
            }
            (None, true) => Vec::new(),
            (Some(names), false) => {
                let mut out = Vec::new();
                for (n, line, col) in names {
                    if n == ERROR_LABEL {
                        out.push(Target::Error);
                        continue;
                    }
                    match labels.iter().position(|l| l == n) {
                        Some(l) => out.push(Target::Label(l)),
                        None => {
                            return Err(ParseError::Semantic(vec![Diagnostic {
                                kind: DiagKind::UnknownLabel(n.clone()),
                                location: format!("{}/{}:{}:{}", proc_.pid, tid, line, col),
                            }]))
                        }
                    }
                }
                out
            }
            (None, false) => match pending.get(k + 1) {
                Some(next) => vec![Target::Label(next.label)],
                None => {
                    return Err(ParseError::Syntax {
                        line: pi.line,
                        col: pi.col,
                        msg: "last instruction of a transaction needs an explicit goto or must be commit".into(),
                    })
                }
            },
        };
        instrs.push(Instruction { label: pi.label, kind: pi.kind.clone(), targets });
    }
    Ok((Transaction { tid, labels, entry, instrs }, fixups))
}

fn parse_instr(ps: &mut Parser, prog: &Program, proc_: &Process) -> Result<InstrKind, ParseError> {
    if ps.is_kw("begin") {
        ps.pos += 1;
        return Ok(InstrKind::Begin);
    }
    if ps.is_kw("commit") || ps.is_kw("end") {
        ps.pos += 1;
        return Ok(InstrKind::Commit);
    }
    if ps.is_kw("assume") {
        ps.pos += 1;
        let e = ps.expr(&proc_.regs, prog.domain_size)?;
        return match e.type_of() {
            Ok(ExprType::Bool) => Ok(InstrKind::Assume(e)),
            Ok(ExprType::Int) => ps.err("assume needs a boolean expression"),
            Err(m) => ps.err(m),
        };
    }
    let lhs = ps.name("register or variable")?;
    if ps.is_sym(":=") || ps.is_sym("=") {
        ps.pos += 1;
    } else {
        return ps.err("expected `:=`");
    }
    let reg = proc_.regs.iter().position(|r| *r == lhs);
    let var = prog.var_id(&lhs);
    match (reg, var) {
        (Some(_), Some(_)) => ps.err(format!("`{lhs}` is both a register and a shared variable")),
        (Some(reg), None) => {
            // A bare shared-variable name on the right is a read.
            if let (Some(Tok::Ident(w)), Some(Tok::Sym(";"))) = (ps.peek(), ps.peek_at(1)) {
                if let Some(var) = prog.var_id(w) {
                    ps.pos += 1;
                    return Ok(InstrKind::Read { reg, var });
                }
            }
            let e = ps.expr(&proc_.regs, prog.domain_size)?;
            match e.type_of() {
                Ok(ExprType::Int) => Ok(InstrKind::Assign { reg, expr: e }),
                _ => ps.err("register assignment needs an integer expression"),
            }
        }
        (None, Some(var)) => {
            let e = ps.expr(&proc_.regs, prog.domain_size)?;
            match e.type_of() {
                Ok(ExprType::Int) => Ok(InstrKind::Write { var, expr: e }),
                _ => ps.err("write needs an integer expression over registers"),
            }
        }
        (None, None) => ps.err(format!("`{lhs}` is neither a register of {} nor a shared variable", proc_.pid)),
    }
}

/// Small builder used by the generator, the instrumentation, and tests to
/// assemble transactions without going through text.
#[derive(Debug, Default)]
pub struct TxnBuilder {
    labels: Vec<String>,
    instrs: Vec<Instruction>,
}

impl TxnBuilder {
    pub fn new() -> TxnBuilder {
        TxnBuilder::default()
    }

    /// Returns the id of a fresh label named `prefix<n>`.
    pub fn fresh(&mut self, prefix: &str) -> LabelId {
        let name = format!("{prefix}{}", self.labels.len());
        self.labels.push(name);
        self.labels.len() - 1
    }

    pub fn named(&mut self, name: &str) -> LabelId {
        match self.labels.iter().position(|l| l == name) {
            Some(i) => i,
            None => {
                self.labels.push(name.to_string());
                self.labels.len() - 1
            }
        }
    }

    pub fn push(&mut self, label: LabelId, kind: InstrKind, targets: Vec<Target>) {
        self.instrs.push(Instruction { label, kind, targets });
    }

    pub fn finish(self, tid: &str, entry: LabelId) -> Transaction {
        Transaction { tid: tid.to_string(), labels: self.labels, entry, instrs: self.instrs }
    }
}

/// Builds a straight-line transaction `begin; body...; commit` with labels
/// `l0, l1, ...`.
pub fn straight_line(tid: &str, body: Vec<InstrKind>) -> Transaction {
    let mut b = TxnBuilder::new();
    let n = body.len() + 2;
    let ls: Vec<LabelId> = (0..n).map(|_| b.fresh("l")).collect();
    b.push(ls[0], InstrKind::Begin, vec![Target::Label(ls[1])]);
    for (k, kind) in body.into_iter().enumerate() {
        b.push(ls[k + 1], kind, vec![Target::Label(ls[k + 2])]);
    }
    b.push(ls[n - 1], InstrKind::Commit, vec![]);
    b.finish(tid, ls[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    const WS: &str = "program ws
domain 2
vars x y
process p1 regs r1
  txn t1
    l0: begin; goto l1;
    l1: r1 := y; goto l2;
    l2: x := 1; goto l3;
    l3: commit;
process p2 regs r2
  txn t2
    l0: begin;
    l1: r2 := x;
    l2: y := 1;
    l3: end;
";

    #[test]
    fn parses_write_skew() {
        let p = parse_program(WS).unwrap();
        assert_eq!(p.processes.len(), 2);
        assert_eq!(p.vars, vec!["x", "y"]);
        assert!(p.processes.iter().all(|q| q.txns.len() == 1));
        let t1 = &p.processes[0].txns[0];
        assert_eq!(t1.read_set(), BTreeSet::from([1]));
        assert_eq!(t1.write_set(), BTreeSet::from([0]));
    }

    #[test]
    fn empty_program() {
        let p = parse_program("program").unwrap();
        assert!(p.processes.is_empty());
        assert_eq!(parse_program(&print_program(&p)).unwrap(), p);
    }

    #[test]
    fn unknown_goto_is_semantic_error() {
        let src = "program\nvars x\nprocess p regs r\n txn t\n l0: begin; goto nowhere;\n l1: commit;\n";
        match parse_program(src) {
            Err(ParseError::Semantic(d)) => assert!(matches!(&d[0].kind, DiagKind::UnknownLabel(n) if n == "nowhere")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_program("program\nvars x\nprocess p regs r\n txn t\n l0: begin ? ;\n").unwrap_err();
        assert_eq!(err, ParseError::Syntax { line: 5, col: 12, msg: "unexpected character `?`".into() });
    }

    #[test]
    fn validate_reports_nested_begin_and_undeclared_var() {
        let mut p = parse_program(WS).unwrap();
        assert!(validate_program(&p).is_empty());
        let t = &mut p.processes[0].txns[0];
        t.instrs[1].kind = InstrKind::Begin;
        let d = validate_program(&p);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiagKind::NestedBegin);
        assert_eq!(d[0].location, "p1/t1/l1");

        let mut p = parse_program(WS).unwrap();
        p.processes[0].txns[0].instrs[1].kind = InstrKind::Read { reg: 0, var: 2 };
        let d = validate_program(&p);
        assert_eq!(d.iter().map(|d| d.kind.clone()).collect::<Vec<_>>(), vec![DiagKind::UndeclaredVariable("#2".into())]);
    }

    #[test]
    fn missing_commit_path_detected() {
        let src = "program\nvars x\nprocess p regs r\n txn t\n l0: begin; goto l1, l2;\n l1: r := x; goto l1;\n l2: commit;\n";
        match parse_program(src) {
            Err(ParseError::Semantic(d)) => assert_eq!(d[0].kind, DiagKind::MissingCommitPath),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn expression_printing_round_trips() {
        let src = "program\ndomain 3\nvars x\nprocess p regs a b\n txn t\n l0: begin;\n l1: a := x;\n \
                   l2: assume !(a < b + 1) || a == 2 && b >= 1;\n l3: x := a - (b - 1);\n l4: b := *;\n l5: commit;\n";
        let p = parse_program(src).unwrap();
        let printed = print_program(&p);
        assert_eq!(parse_program(&printed).unwrap(), p);
        assert!(printed.contains("x := a - (b - 1)"));
        assert!(printed.contains("assume !(a < b + 1) || a == 2 && 1 <= b"));
    }

    #[test]
    fn modular_arithmetic() {
        let e = Expr::bin(BinOp::Sub, Expr::Const(0), Expr::Const(1));
        assert_eq!(e.eval_int(&[], 3), vec![2]);
        let e = Expr::bin(BinOp::Add, Expr::Reg(0), Expr::Const(2));
        assert_eq!(e.eval_int(&[2], 3), vec![1]);
        assert_eq!(Expr::Nondet.eval_int(&[], 2), vec![0, 1]);
        let c = Expr::bin(BinOp::Lt, Expr::Nondet, Expr::Const(1));
        assert_eq!(c.eval_bool(&[], 2), (true, true));
    }
}
