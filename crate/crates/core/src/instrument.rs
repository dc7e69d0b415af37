//! Reduction of SI robustness to reachability under serializability.
//!
//! A program is not robust iff it has a non-serializable SI execution of the
//! shape `alpha . isu(t) . beta . com(t)` where `t` is the only transaction
//! with others running between its issue and commit, every transaction in
//! `beta` is reachable from `t` in the happens-before graph, none of them
//! writes a variable `t` writes, and some of them reads a variable `t`
//! writes (closing the cycle through an `rw` edge into `com(t)`).
//!
//! The instrumented program simulates such executions serially. Every
//! transaction gets three copies, chosen at `begin`:
//!
//! * normal: runs before the attack (`@a_tr == 0`), unchanged;
//! * attacker: starts the attack (`@a_tr := 1`) and plays `t`. Its reads see
//!   the state at this point, which is its snapshot; its writes go to shadow
//!   variables `@x'` so that nobody else sees them, and are flagged in
//!   `@x.ev`. Loads are flagged in `@x.la`;
//! * helper: runs after the attack started, in any other process. It must
//!   join the happens-before chain from `t` before it commits, through a
//!   write to a variable loaded by the attacker or by an earlier helper
//!   (`@x.la`, `@x.ld`), a write or read of a variable stored by an earlier
//!   helper (`@x.st`), or program order (`@hbh` is kept per process). It may
//!   not write variables the attacker wrote. A joined helper that read a
//!   variable the attacker wrote goes to the error location at its commit.
//!
//! Helper flags are published at commit so that a transaction never joins
//! through its own accesses. Expressions only mention registers, so every
//! flag test first loads the flag into the scratch register `@t`.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::ir::{BinOp, Expr, InstrKind, LabelId, Process, Program, RegId, Target, Transaction, TxnBuilder, VarId};
use crate::reach::{reach, ReachQuery, ReachTarget, Search};
use crate::semantics::{replay_all, Event, EventKind, Mode, TxnInst};
use crate::traces::{find_cycle, trace_of, Witness};

/// What a variable of the instrumented program stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VarRole {
    Orig(VarId),
    Shadow(VarId),
    Flag,
}

#[derive(Debug, Clone)]
pub struct Instrumented {
    pub program: Program,
    pub roles: Vec<VarRole>,
    a_tr: VarId,
}

struct Vars {
    shadow: Vec<VarId>,
    la: Vec<VarId>,
    ld: Vec<VarId>,
    st: Vec<VarId>,
    ev: Vec<VarId>,
    a_tr: VarId,
}

struct Regs {
    a: RegId,
    hbh: RegId,
    err: RegId,
    t: RegId,
    /// Per variable: "written by the current transaction".
    w: Vec<Option<RegId>>,
    /// Per variable: "read from outside by the current transaction".
    r: Vec<Option<RegId>>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Copy {
    Normal,
    Attacker,
    Helper,
}

fn reg(r: RegId) -> Expr {
    Expr::Reg(r)
}

fn eq0(r: RegId) -> Expr {
    Expr::eq(reg(r), Expr::Const(0))
}

fn ne0(r: RegId) -> Expr {
    Expr::bin(BinOp::Ne, reg(r), Expr::Const(0))
}

/// Straight-line emission into a transaction under construction.
struct Emit<'b> {
    b: &'b mut TxnBuilder,
    cur: LabelId,
}

impl<'b> Emit<'b> {
    fn fresh(&mut self) -> LabelId {
        self.b.fresh("i")
    }

    fn op(&mut self, kind: InstrKind) {
        let n = self.fresh();
        self.b.push(self.cur, kind, vec![Target::Label(n)]);
        self.cur = n;
    }

    fn assume(&mut self, e: Expr) {
        self.op(InstrKind::Assume(e));
    }

    fn set_reg(&mut self, r: RegId, v: u8) {
        self.op(InstrKind::Assign { reg: r, expr: Expr::Const(v) });
    }

    fn set_var(&mut self, x: VarId, v: u8) {
        self.op(InstrKind::Write { var: x, expr: Expr::Const(v) });
    }

    /// `if cond { then } ` with both arms rejoining.
    fn when(&mut self, cond: Expr, then: impl FnOnce(&mut Emit)) {
        let (yes, no, join) = (self.fresh(), self.fresh(), self.fresh());
        self.b.push(self.cur, InstrKind::Assume(cond.clone()), vec![Target::Label(yes)]);
        self.b.push(self.cur, InstrKind::Assume(Expr::not(cond)), vec![Target::Label(no)]);
        self.b.push(no, InstrKind::Assume(Expr::Bool(true)), vec![Target::Label(join)]);
        let mut e = Emit { b: self.b, cur: yes };
        then(&mut e);
        let end = e.cur;
        self.b.push(end, InstrKind::Assume(Expr::Bool(true)), vec![Target::Label(join)]);
        self.cur = join;
    }

    /// Loads flag `x` into `@t` and runs `then` when it is set.
    fn when_flag(&mut self, t: RegId, x: VarId, then: impl FnOnce(&mut Emit)) {
        self.op(InstrKind::Read { reg: t, var: x });
        self.when(ne0(t), then);
    }

    /// Ends the chain with `kind` jumping to `targets`.
    fn finish(self, kind: InstrKind, targets: Vec<Target>) {
        self.b.push(self.cur, kind, targets);
    }
}

pub fn instrument(p: &Program) -> Instrumented {
    let n = p.vars.len();
    let mut vars = p.vars.clone();
    let mut roles: Vec<VarRole> = (0..n).map(VarRole::Orig).collect();
    let mut add = |name: String, role: VarRole| {
        vars.push(name);
        roles.push(role);
        vars.len() - 1
    };
    let shadow: Vec<VarId> = (0..n).map(|x| add(format!("@{}'", p.vars[x]), VarRole::Shadow(x))).collect();
    let mut flag = |suffix: &str| -> Vec<VarId> { (0..n).map(|x| add(format!("@{}.{suffix}", p.vars[x]), VarRole::Flag)).collect() };
    let la = flag("la");
    let ld = flag("ld");
    let st = flag("st");
    let ev = flag("ev");
    let a_tr = add("@a_tr".into(), VarRole::Flag);
    let v = Vars { shadow, la, ld, st, ev, a_tr };

    let processes = p
        .processes
        .iter()
        .map(|pr| {
            let mut regs = pr.regs.clone();
            let mut new_reg = |name: String| {
                regs.push(name);
                regs.len() - 1
            };
            let (a, hbh, err, t) = (new_reg("@a".into()), new_reg("@hbh".into()), new_reg("@err".into()), new_reg("@t".into()));
            let written: BTreeSet<VarId> = pr.txns.iter().flat_map(|t| t.write_set()).collect();
            let read: BTreeSet<VarId> = pr.txns.iter().flat_map(|t| t.read_set()).collect();
            let w = (0..n).map(|x| written.contains(&x).then(|| new_reg(format!("@w.{}", p.vars[x])))).collect();
            let r = (0..n).map(|x| read.contains(&x).then(|| new_reg(format!("@r.{}", p.vars[x])))).collect();
            let rg = Regs { a, hbh, err, t, w, r };
            let txns = pr.txns.iter().map(|tx| instrument_txn(tx, &v, &rg)).collect();
            Process { pid: pr.pid.clone(), regs, txns }
        })
        .collect();
    let program = Program { name: format!("{}_instr", p.name), domain_size: p.domain_size, vars, processes };
    Instrumented { program, roles, a_tr }
}

fn instrument_txn(tx: &Transaction, v: &Vars, rg: &Regs) -> Transaction {
    let mut b = TxnBuilder::new();
    let entry = b.named("begin_");
    let copies = [Copy::Normal, Copy::Attacker, Copy::Helper];
    // Label maps per copy, plus a blocking sink replacing error targets of
    // the original program.
    let has_error = tx.instrs.iter().any(|i| i.targets.contains(&Target::Error));
    let mut maps: Vec<Vec<LabelId>> = Vec::new();
    let mut sinks = Vec::new();
    for (ci, _) in copies.iter().enumerate() {
        let prefix = ["n_", "a_", "h_"][ci];
        let m = tx
            .labels
            .iter()
            .enumerate()
            .map(|(k, l)| if k == tx.entry { usize::MAX } else { b.named(&format!("{prefix}{l}")) })
            .collect();
        maps.push(m);
        if has_error {
            let sink = b.named(&format!("{prefix}blocked"));
            b.push(sink, InstrKind::Assume(Expr::Bool(false)), vec![Target::Label(sink)]);
            sinks.push(sink);
        }
    }
    let starts: Vec<LabelId> = (0..3).map(|ci| b.named(["n_start", "a_start", "h_start"][ci])).collect();
    b.push(entry, InstrKind::Begin, starts.iter().map(|&l| Target::Label(l)).collect());

    let wset = tx.write_set();
    let rset = tx.read_set();
    let begin_targets: Vec<Target> = tx.at(tx.entry).flat_map(|i| i.targets.clone()).collect();
    for (ci, &copy) in copies.iter().enumerate() {
        let map = |tg: &Target| match tg {
            Target::Label(l) => Target::Label(maps[ci][*l]),
            Target::Error => Target::Label(sinks[ci]),
            Target::Txn(k) => Target::Txn(*k),
        };
        // Prologue.
        let mut e = Emit { b: &mut b, cur: starts[ci] };
        e.op(InstrKind::Read { reg: rg.t, var: v.a_tr });
        match copy {
            Copy::Normal => e.assume(eq0(rg.t)),
            Copy::Attacker => {
                e.assume(eq0(rg.t));
                e.set_var(v.a_tr, 1);
                e.set_reg(rg.a, 1);
                for &x in &wset {
                    e.set_reg(rg.w[x].unwrap(), 0);
                }
            }
            Copy::Helper => {
                e.assume(ne0(rg.t));
                e.assume(eq0(rg.a));
                e.set_reg(rg.err, 0);
                for &x in &wset {
                    e.set_reg(rg.w[x].unwrap(), 0);
                }
                for &x in &rset {
                    e.set_reg(rg.r[x].unwrap(), 0);
                }
            }
        }
        e.finish(InstrKind::Assume(Expr::Bool(true)), begin_targets.iter().map(map).collect());

        for ins in &tx.instrs {
            if ins.label == tx.entry && ins.kind == InstrKind::Begin {
                continue;
            }
            let start = maps[ci][ins.label];
            let targets: Vec<Target> = ins.targets.iter().map(map).collect();
            let mut e = Emit { b: &mut b, cur: start };
            match (&ins.kind, copy) {
                (InstrKind::Read { reg: r, var: x }, Copy::Attacker) => {
                    let (r, x) = (*r, *x);
                    let external = |e: &mut Emit| {
                        e.op(InstrKind::Read { reg: r, var: x });
                        e.set_var(v.la[x], 1);
                    };
                    match rg.w[x].filter(|_| wset.contains(&x)) {
                        Some(wx) => {
                            let (own, ext, join) = (e.fresh(), e.fresh(), e.fresh());
                            e.b.push(e.cur, InstrKind::Assume(ne0(wx)), vec![Target::Label(own)]);
                            e.b.push(e.cur, InstrKind::Assume(eq0(wx)), vec![Target::Label(ext)]);
                            e.b.push(own, InstrKind::Read { reg: r, var: v.shadow[x] }, vec![Target::Label(join)]);
                            let mut f = Emit { b: e.b, cur: ext };
                            external(&mut f);
                            let end = f.cur;
                            e.b.push(end, InstrKind::Assume(Expr::Bool(true)), vec![Target::Label(join)]);
                            e.cur = join;
                        }
                        None => external(&mut e),
                    }
                    e.finish(InstrKind::Assume(Expr::Bool(true)), targets);
                }
                (InstrKind::Read { reg: r, var: x }, Copy::Helper) => {
                    let (r, x) = (*r, *x);
                    let external = |e: &mut Emit| {
                        e.op(InstrKind::Read { reg: r, var: x });
                        e.when_flag(rg.t, v.st[x], |e| e.set_reg(rg.hbh, 1));
                        e.when_flag(rg.t, v.ev[x], |e| e.set_reg(rg.err, 1));
                        e.set_reg(rg.r[x].unwrap(), 1);
                    };
                    match rg.w[x].filter(|_| wset.contains(&x)) {
                        Some(wx) => {
                            let (own, ext, join) = (e.fresh(), e.fresh(), e.fresh());
                            e.b.push(e.cur, InstrKind::Assume(ne0(wx)), vec![Target::Label(own)]);
                            e.b.push(e.cur, InstrKind::Assume(eq0(wx)), vec![Target::Label(ext)]);
                            e.b.push(own, InstrKind::Read { reg: r, var: x }, vec![Target::Label(join)]);
                            let mut f = Emit { b: e.b, cur: ext };
                            external(&mut f);
                            let end = f.cur;
                            e.b.push(end, InstrKind::Assume(Expr::Bool(true)), vec![Target::Label(join)]);
                            e.cur = join;
                        }
                        None => external(&mut e),
                    }
                    e.finish(InstrKind::Assume(Expr::Bool(true)), targets);
                }
                (InstrKind::Write { var: x, expr }, Copy::Attacker) => {
                    let x = *x;
                    e.op(InstrKind::Write { var: v.shadow[x], expr: expr.clone() });
                    e.set_var(v.ev[x], 1);
                    e.finish(InstrKind::Assign { reg: rg.w[x].unwrap(), expr: Expr::Const(1) }, targets);
                }
                (InstrKind::Write { var: x, expr }, Copy::Helper) => {
                    let x = *x;
                    e.op(InstrKind::Read { reg: rg.t, var: v.ev[x] });
                    e.assume(eq0(rg.t));
                    for f in [v.la[x], v.ld[x], v.st[x]] {
                        e.when_flag(rg.t, f, |e| e.set_reg(rg.hbh, 1));
                    }
                    e.op(InstrKind::Write { var: x, expr: expr.clone() });
                    e.finish(InstrKind::Assign { reg: rg.w[x].unwrap(), expr: Expr::Const(1) }, targets);
                }
                (InstrKind::Commit, Copy::Helper) => {
                    e.assume(ne0(rg.hbh));
                    let (fail, ok) = (e.fresh(), e.fresh());
                    e.b.push(e.cur, InstrKind::Assume(ne0(rg.err)), vec![Target::Label(fail)]);
                    e.b.push(fail, InstrKind::Assume(Expr::Bool(true)), vec![Target::Error]);
                    e.b.push(e.cur, InstrKind::Assume(eq0(rg.err)), vec![Target::Label(ok)]);
                    e.cur = ok;
                    for &x in &rset {
                        let rx = rg.r[x].unwrap();
                        e.when(ne0(rx), |e| e.set_var(v.ld[x], 1));
                    }
                    for &x in &wset {
                        let wx = rg.w[x].unwrap();
                        e.when(ne0(wx), |e| e.set_var(v.st[x], 1));
                    }
                    e.finish(InstrKind::Commit, targets);
                }
                (kind, _) => e.finish(kind.clone(), targets),
            }
        }
    }
    b.finish(&tx.tid, entry)
}

/// Which transactions played which part in an error path of the
/// instrumented program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleTranscript {
    /// Serial path of the instrumented program reaching the error location.
    pub instrumented_path: Vec<Event>,
    pub attacker: TxnInst,
    /// Transactions run in helper mode, in order; the last one reaches the
    /// error location.
    pub helpers: Vec<TxnInst>,
    /// The corresponding SI execution of the original program.
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionResult {
    pub robust: bool,
    pub bound_hit: bool,
    pub states_explored: usize,
    pub instrumented_size: usize,
    pub transcript: Option<RoleTranscript>,
    /// The mapped-back execution with its (value-blind) trace and cycle,
    /// present when the mapping replays and is non-serializable.
    pub witness: Option<Witness>,
}

impl Instrumented {
    /// Maps a serial error path of the instrumented program back to an SI
    /// execution of `orig`: flag accesses are dropped, shadow accesses
    /// become accesses of the original variable, and the attacker's commit
    /// moves to the end, after the commit of the helper that found the
    /// error.
    pub fn map_back(&self, path: &[Event]) -> Option<RoleTranscript> {
        let attacker = path
            .iter()
            .find(|e| matches!(e.kind, EventKind::Isu { var, .. } if var == self.a_tr))
            .map(|e| e.txn)?;
        let start = path.iter().position(|e| e.txn == attacker && e.kind == EventKind::Begin)?;
        let mut helpers = Vec::new();
        for e in &path[start..] {
            if e.kind == EventKind::Begin && e.txn != attacker {
                helpers.push(e.txn);
            }
        }
        let mut out = Vec::new();
        for e in path {
            if e.txn == attacker && e.kind == EventKind::Com {
                continue;
            }
            let kind = match e.kind {
                EventKind::Load { var, value } => match self.roles[var] {
                    VarRole::Orig(x) | VarRole::Shadow(x) => EventKind::Load { var: x, value },
                    VarRole::Flag => continue,
                },
                EventKind::Isu { var, value } => match self.roles[var] {
                    VarRole::Orig(x) | VarRole::Shadow(x) => EventKind::Isu { var: x, value },
                    VarRole::Flag => continue,
                },
                k => k,
            };
            out.push(Event { kind, txn: e.txn });
        }
        let last = *helpers.last()?;
        out.push(Event { kind: EventKind::Com, txn: last });
        out.push(Event { kind: EventKind::Com, txn: attacker });
        Some(RoleTranscript { instrumented_path: path.to_vec(), attacker, helpers, events: out })
    }
}

/// Decides (value-blind) robustness by searching the instrumented program
/// for a reachable error state under serializability.
pub fn check_robustness_by_reduction(p: &Program, bound: Option<usize>) -> ReductionResult {
    let ins = instrument(p);
    let q = ReachQuery { program: &ins.program, target: ReachTarget::Error, bound, mode: Mode::Ser, search: Search::Dfs };
    let r = reach(&q);
    let transcript = r.path.as_deref().and_then(|path| ins.map_back(path));
    let witness = transcript.as_ref().and_then(|t| {
        replay_all(p, &t.events, Mode::Si).ok()?;
        let trace = trace_of(p, &t.events, false).ok()?;
        let cycle = find_cycle(&trace)?;
        Some(Witness { events: t.events.clone(), trace, cycle })
    });
    if r.reachable && witness.is_none() {
        log::error!("error path of the instrumented program does not map back to an anomaly");
    }
    ReductionResult {
        robust: !r.reachable,
        bound_hit: r.bound_hit,
        states_explored: r.states_explored,
        instrumented_size: ins.program.instr_count(),
        transcript,
        witness,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{parse_program, print_program, validate_program};

    #[test]
    fn instrumented_ws_is_valid_and_round_trips() {
        let p = parse_program(include_str!("../corpus/ws.txn")).unwrap();
        let ins = instrument(&p);
        assert!(validate_program(&ins.program).is_empty(), "{:?}", validate_program(&ins.program));
        // Label ids are renumbered by the parser, so compare printed forms.
        let text = print_program(&ins.program);
        assert_eq!(print_program(&parse_program(&text).unwrap()), text);
    }

    #[test]
    fn ws_error_is_reachable_and_maps_back() {
        let p = parse_program(include_str!("../corpus/ws.txn")).unwrap();
        let r = check_robustness_by_reduction(&p, None);
        assert!(!r.robust);
        let w = r.witness.expect("mapped witness");
        assert_eq!(w.cycle.len(), 2);
        let t = r.transcript.unwrap();
        assert_eq!(t.helpers.len(), 1);
    }

    #[test]
    fn ws_variant_is_robust() {
        let p = parse_program(include_str!("../corpus/ws_variant.txn")).unwrap();
        assert!(check_robustness_by_reduction(&p, None).robust);
    }
}
