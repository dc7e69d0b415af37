//! Operational semantics under snapshot isolation (SI) and serializability
//! (SER).
//!
//! A process is either between transactions ([`Pc::Boundary`]), inside a
//! transaction ([`Pc::In`]), done, or at the error location. Only `begin`,
//! reads, writes and `commit` produce events; `assume` and register
//! assignments are silent and are folded into the preceding visible step, so
//! every state handed out by this module has each active process parked at a
//! label that carries a visible instruction (or stuck on a blocked `assume`).
//!
//! Under SI a `begin` copies the central log into the local store, reads and
//! writes touch only the local store, and `commit` publishes the written
//! variables if none of them was committed by someone else after the
//! transaction started. A commit that fails this check has no successor: the
//! branch is pruned. SER additionally forbids interleaving: while a
//! transaction is active only its own process may move.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{Expr, InstrKind, LabelId, Program, Target, Transaction, Value, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Si,
    Ser,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Mode, String> {
        match s.to_ascii_lowercase().as_str() {
            "si" => Ok(Mode::Si),
            "ser" | "sc" => Ok(Mode::Ser),
            _ => Err(format!("unknown mode `{s}` (expected si or ser)")),
        }
    }
}

/// A dynamic transaction instance: process, static transaction, and how many
/// times this transaction had started before in the same process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TxnInst {
    pub proc: usize,
    pub txn: usize,
    pub inst: u32,
}

impl TxnInst {
    pub fn name(&self, p: &Program) -> String {
        let tid = &p.processes[self.proc].txns[self.txn].tid;
        if self.inst == 0 {
            tid.clone()
        } else {
            format!("{tid}[{}]", self.inst)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Begin,
    Load { var: VarId, value: Value },
    Isu { var: VarId, value: Value },
    Com,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub txn: TxnInst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pc {
    /// About to begin the given transaction of the process.
    Boundary(usize),
    In { txn: usize, label: LabelId },
    Finished,
    Error,
}

impl Pc {
    pub fn is_active(&self) -> bool {
        matches!(self, Pc::In { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LocalState {
    pub pc: Pc,
    pub store: Vec<Value>,
    pub txnwrs: Vec<bool>,
    pub regs: Vec<Value>,
    /// Start timestamp of the active transaction (0 when idle).
    pub sti: u64,
    /// Started instances per static transaction of this process.
    pub instances: Vec<u32>,
}

impl LocalState {
    pub fn current_inst(&self, txn: usize) -> u32 {
        self.instances[txn].saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MachineState {
    pub ls: Vec<LocalState>,
    pub tstamp: Vec<u64>,
    pub log: Vec<Value>,
    pub clock: u64,
}

impl MachineState {
    /// Canonical key used for state deduplication. Timestamps are dropped;
    /// for each active transaction the set of variables committed by others
    /// since it began is kept instead, since that is all the commit rule
    /// consults. Idle processes contribute only their pc and registers.
    pub fn key(&self) -> Vec<u8> {
        let mut k = Vec::with_capacity(self.log.len() + self.ls.len() * 8);
        for l in &self.ls {
            match l.pc {
                Pc::Boundary(t) => {
                    k.push(0);
                    k.extend_from_slice(&(t as u16).to_le_bytes());
                }
                Pc::In { txn, label } => {
                    k.push(1);
                    k.extend_from_slice(&(txn as u16).to_le_bytes());
                    k.extend_from_slice(&(label as u16).to_le_bytes());
                }
                Pc::Finished => k.push(2),
                Pc::Error => k.push(3),
            }
            k.extend_from_slice(&l.regs);
            if l.pc.is_active() {
                k.extend_from_slice(&l.store);
                for (x, w) in l.txnwrs.iter().enumerate() {
                    k.push(*w as u8 | (((self.tstamp[x] > l.sti) as u8) << 1));
                }
            }
        }
        k.extend_from_slice(&self.log);
        k
    }

    pub fn all_done(&self) -> bool {
        self.ls.iter().all(|l| matches!(l.pc, Pc::Finished | Pc::Error))
    }

    pub fn at_error(&self) -> bool {
        self.ls.iter().any(|l| l.pc == Pc::Error)
    }

    pub fn active_proc(&self) -> Option<usize> {
        self.ls.iter().position(|l| l.pc.is_active())
    }
}

pub fn initial_state(p: &Program) -> MachineState {
    let n = p.vars.len();
    let ls = p
        .processes
        .iter()
        .map(|proc_| LocalState {
            pc: if proc_.txns.is_empty() { Pc::Finished } else { Pc::Boundary(0) },
            store: vec![0; n],
            txnwrs: vec![false; n],
            regs: vec![0; proc_.regs.len()],
            sti: 0,
            instances: vec![0; proc_.txns.len()],
        })
        .collect();
    MachineState { ls, tstamp: vec![0; n], log: vec![0; n], clock: 1 }
}

/// Runs silent instructions of `proc_` from `ls` until every branch is parked
/// at a label with a visible instruction, at the error location, or blocked.
pub(crate) fn settle(p: &Program, proc_: usize, ls: LocalState) -> Vec<LocalState> {
    let (txn, label) = match ls.pc {
        Pc::In { txn, label } => (txn, label),
        _ => return vec![ls],
    };
    let t = &p.processes[proc_].txns[txn];
    let has_visible = |l: LabelId| t.at(l).any(|i| !matches!(i.kind, InstrKind::Assume(_) | InstrKind::Assign { .. }));
    if t.at(label).all(|i| !matches!(i.kind, InstrKind::Assume(_) | InstrKind::Assign { .. })) {
        return vec![ls];
    }
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut stack = vec![ls.clone()];
    while let Some(cur) = stack.pop() {
        if !seen.insert((cur.pc, cur.regs.clone())) {
            continue;
        }
        let Pc::In { label, .. } = cur.pc else {
            out.push(cur);
            continue;
        };
        let mut moved = false;
        for i in t.at(label) {
            let nexts: Vec<Vec<Value>> = match &i.kind {
                InstrKind::Assume(e) => {
                    if e.eval_bool(&cur.regs, p.domain_size).0 {
                        vec![cur.regs.clone()]
                    } else {
                        vec![]
                    }
                }
                InstrKind::Assign { reg, expr } => expr
                    .eval_int(&cur.regs, p.domain_size)
                    .into_iter()
                    .map(|v| {
                        let mut r = cur.regs.clone();
                        r[*reg] = v;
                        r
                    })
                    .collect(),
                _ => continue,
            };
            for regs in nexts {
                for tg in &i.targets {
                    moved = true;
                    let mut n = cur.clone();
                    n.regs = regs.clone();
                    n.pc = match tg {
                        Target::Label(l) => Pc::In { txn, label: *l },
                        Target::Error => Pc::Error,
                        Target::Txn(_) => unreachable!("validated"),
                    };
                    stack.push(n);
                }
            }
        }
        if has_visible(label) || !moved {
            out.push(cur);
        }
    }
    if out.is_empty() {
        // A purely silent cycle: keep the process where it was, stuck.
        out.push(ls);
    }
    // Deterministic order independent of the stack discipline.
    out.sort_by(|a, b| (a.pc, &a.regs).cmp(&(b.pc, &b.regs)));
    out
}

fn jump(txn: usize, tg: &Target) -> Pc {
    match tg {
        Target::Label(l) => Pc::In { txn, label: *l },
        Target::Error => Pc::Error,
        Target::Txn(_) => unreachable!("validated"),
    }
}

/// Successors of process `q` alone, under SI rules.
pub fn proc_successors(p: &Program, s: &MachineState, q: usize) -> Vec<(Event, MachineState)> {
    let mut out = Vec::new();
    let l = &s.ls[q];
    let proc_ = &p.processes[q];
    match l.pc {
        Pc::Finished | Pc::Error => {}
        Pc::Boundary(k) => {
            let t = &proc_.txns[k];
            let ev = Event { kind: EventKind::Begin, txn: TxnInst { proc: q, txn: k, inst: l.instances[k] } };
            for i in t.at(t.entry) {
                for tg in &i.targets {
                    let mut n = s.clone();
                    let nl = &mut n.ls[q];
                    nl.store = s.log.clone();
                    nl.txnwrs.iter_mut().for_each(|w| *w = false);
                    nl.sti = s.clock;
                    nl.instances[k] += 1;
                    nl.pc = jump(k, tg);
                    n.clock += 1;
                    push_settled(p, q, n, ev, &mut out);
                }
            }
        }
        Pc::In { txn, label } => {
            let t = &proc_.txns[txn];
            let ti = TxnInst { proc: q, txn, inst: l.current_inst(txn) };
            for i in t.at(label) {
                match &i.kind {
                    InstrKind::Read { reg, var } => {
                        let v = l.store[*var];
                        let ev = Event { kind: EventKind::Load { var: *var, value: v }, txn: ti };
                        for tg in &i.targets {
                            let mut n = s.clone();
                            n.ls[q].regs[*reg] = v;
                            n.ls[q].pc = jump(txn, tg);
                            push_settled(p, q, n, ev, &mut out);
                        }
                    }
                    InstrKind::Write { var, expr } => {
                        for v in expr.eval_int(&l.regs, p.domain_size) {
                            let ev = Event { kind: EventKind::Isu { var: *var, value: v }, txn: ti };
                            for tg in &i.targets {
                                let mut n = s.clone();
                                n.ls[q].store[*var] = v;
                                n.ls[q].txnwrs[*var] = true;
                                n.ls[q].pc = jump(txn, tg);
                                push_settled(p, q, n, ev, &mut out);
                            }
                        }
                    }
                    InstrKind::Commit => {
                        let ok = (0..s.log.len()).all(|x| !l.txnwrs[x] || s.tstamp[x] < l.sti);
                        if !ok {
                            continue;
                        }
                        let ev = Event { kind: EventKind::Com, txn: ti };
                        let mut base = s.clone();
                        let cti = base.clock;
                        base.clock += 1;
                        for x in 0..s.log.len() {
                            if l.txnwrs[x] {
                                base.log[x] = l.store[x];
                                base.tstamp[x] = cti;
                            }
                        }
                        base.ls[q].sti = 0;
                        base.ls[q].txnwrs.iter_mut().for_each(|w| *w = false);
                        let nexts: Vec<Pc> = if i.targets.is_empty() {
                            vec![if txn + 1 < proc_.txns.len() { Pc::Boundary(txn + 1) } else { Pc::Finished }]
                        } else {
                            i.targets
                                .iter()
                                .map(|tg| match tg {
                                    Target::Txn(k) => Pc::Boundary(*k),
                                    _ => unreachable!("validated"),
                                })
                                .collect()
                        };
                        for pc in nexts {
                            let mut n = base.clone();
                            n.ls[q].pc = pc;
                            out.push((ev, n));
                        }
                    }
                    InstrKind::Begin | InstrKind::Assume(_) | InstrKind::Assign { .. } => {}
                }
            }
        }
    }
    out
}

fn push_settled(p: &Program, q: usize, mut n: MachineState, ev: Event, out: &mut Vec<(Event, MachineState)>) {
    let settled = settle(p, q, n.ls[q].clone());
    let last = settled.len() - 1;
    for (k, l) in settled.into_iter().enumerate() {
        if k == last {
            n.ls[q] = l;
            out.push((ev, n));
            break;
        }
        let mut m = n.clone();
        m.ls[q] = l;
        out.push((ev, m));
    }
}

pub fn enabled_si(p: &Program, s: &MachineState) -> Vec<(Event, MachineState)> {
    (0..s.ls.len()).flat_map(|q| proc_successors(p, s, q)).collect()
}

pub fn enabled_ser(p: &Program, s: &MachineState) -> Vec<(Event, MachineState)> {
    match s.active_proc() {
        Some(q) => proc_successors(p, s, q),
        None => enabled_si(p, s),
    }
}

pub fn enabled(p: &Program, s: &MachineState, mode: Mode) -> Vec<(Event, MachineState)> {
    match mode {
        Mode::Si => enabled_si(p, s),
        Mode::Ser => enabled_ser(p, s),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Execution {
    pub events: Vec<Event>,
    pub final_state: MachineState,
    /// Ended with some process unable to finish (blocked assume, failed
    /// commit, or the step bound).
    pub blocked: bool,
    pub bound_hit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dedup {
    /// Every maximal path is reported.
    None,
    /// A branch is cut when it revisits a state key seen earlier.
    States,
}

struct Frame {
    succs: Vec<(Event, MachineState)>,
    next: usize,
}

/// Depth-first iterator over maximal executions.
pub struct Executions<'a> {
    prog: &'a Program,
    mode: Mode,
    bound: Option<usize>,
    dedup: Dedup,
    visited: HashSet<Vec<u8>>,
    stack: Vec<Frame>,
    events: Vec<Event>,
    started: bool,
    pub bound_hit: bool,
}

pub fn enumerate_executions(p: &Program, mode: Mode, bound: Option<usize>) -> Executions<'_> {
    Executions {
        prog: p,
        mode,
        bound,
        dedup: Dedup::States,
        visited: HashSet::new(),
        stack: Vec::new(),
        events: Vec::new(),
        started: false,
        bound_hit: false,
    }
}

impl<'a> Executions<'a> {
    pub fn dedup(mut self, d: Dedup) -> Self {
        self.dedup = d;
        self
    }

    /// Pushes `s` and returns an execution if it is a leaf.
    fn enter(&mut self, s: MachineState) -> Option<Execution> {
        let at_bound = self.bound.is_some_and(|b| self.events.len() >= b);
        let succs = enabled(self.prog, &s, self.mode);
        if succs.is_empty() || at_bound {
            let bound_hit = at_bound && !succs.is_empty();
            self.bound_hit |= bound_hit;
            return Some(Execution {
                events: self.events.clone(),
                blocked: bound_hit || !s.all_done(),
                final_state: s,
                bound_hit,
            });
        }
        self.stack.push(Frame { succs, next: 0 });
        None
    }
}

impl<'a> Iterator for Executions<'a> {
    type Item = Execution;

    fn next(&mut self) -> Option<Execution> {
        if !self.started {
            self.started = true;
            let s0 = initial_state(self.prog);
            if self.dedup == Dedup::States {
                self.visited.insert(s0.key());
            }
            if let Some(e) = self.enter(s0) {
                return Some(e);
            }
        }
        loop {
            let frame = self.stack.last_mut()?;
            if frame.next >= frame.succs.len() {
                self.stack.pop();
                self.events.pop();
                continue;
            }
            let (ev, s) = frame.succs[frame.next].clone();
            frame.next += 1;
            if self.dedup == Dedup::States && !self.visited.insert(s.key()) {
                continue;
            }
            self.events.push(ev);
            if let Some(e) = self.enter(s) {
                self.events.pop();
                return Some(e);
            }
        }
    }
}

/// How a transaction body run in isolation ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BodyEnd {
    /// Parked at a label carrying a `commit`.
    AtCommit(LabelId),
    /// Jumped to the error location.
    Error,
}

/// One way a transaction body can run from `begin` to its commit point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BodyOutcome {
    pub end: BodyEnd,
    pub regs: Vec<Value>,
    /// Local store at the end: the snapshot overwritten by own writes.
    pub store: Vec<Value>,
    pub written: Vec<bool>,
    /// Variables read before being written by the transaction itself.
    pub ext_read: Vec<bool>,
    /// Load and isu events in program order, without begin and com.
    pub events: Vec<EventKind>,
}

/// Runs transaction `t` on `snapshot` without interference and returns every
/// distinct way it can reach a commit point or the error location. Blocked
/// paths and silent cycles contribute nothing. Since SI reads and writes only
/// touch the local store, this is exactly the set of bodies a transaction can
/// execute between its `begin` and its `commit` in any interleaving.
pub fn run_body(p: &Program, t: &Transaction, regs: &[Value], snapshot: &[Value]) -> Vec<BodyOutcome> {
    let n = snapshot.len();
    let start = BodyOutcome {
        end: BodyEnd::AtCommit(t.entry),
        regs: regs.to_vec(),
        store: snapshot.to_vec(),
        written: vec![false; n],
        ext_read: vec![false; n],
        events: Vec::new(),
    };
    let mut stack: Vec<(LabelId, BodyOutcome)> = Vec::new();
    for i in t.at(t.entry) {
        for tg in &i.targets {
            match tg {
                Target::Label(l) => stack.push((*l, start.clone())),
                Target::Error => {
                    let mut e = start.clone();
                    e.end = BodyEnd::Error;
                    stack.push((usize::MAX, e));
                }
                Target::Txn(_) => {}
            }
        }
    }
    stack.reverse();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut outs_seen = HashSet::new();
    while let Some((label, cur)) = stack.pop() {
        if label == usize::MAX {
            let k = (cur.end, cur.regs.clone(), cur.store.clone(), cur.written.clone(), cur.ext_read.clone());
            if outs_seen.insert(k) {
                out.push(cur);
            }
            continue;
        }
        if !seen.insert((label, cur.regs.clone(), cur.store.clone(), cur.written.clone(), cur.ext_read.clone())) {
            continue;
        }
        let mut nexts: Vec<(Target, BodyOutcome)> = Vec::new();
        for i in t.at(label) {
            let mut go = |c: BodyOutcome| {
                for tg in &i.targets {
                    nexts.push((*tg, c.clone()));
                }
            };
            match &i.kind {
                InstrKind::Commit => {
                    let mut c = cur.clone();
                    c.end = BodyEnd::AtCommit(label);
                    let k = (c.end, c.regs.clone(), c.store.clone(), c.written.clone(), c.ext_read.clone());
                    if outs_seen.insert(k) {
                        out.push(c);
                    }
                }
                InstrKind::Begin => {}
                InstrKind::Read { reg, var } => {
                    let mut c = cur.clone();
                    let v = c.store[*var];
                    c.regs[*reg] = v;
                    if !c.written[*var] {
                        c.ext_read[*var] = true;
                    }
                    c.events.push(EventKind::Load { var: *var, value: v });
                    go(c);
                }
                InstrKind::Write { var, expr } => {
                    for v in expr.eval_int(&cur.regs, p.domain_size) {
                        let mut c = cur.clone();
                        c.store[*var] = v;
                        c.written[*var] = true;
                        c.events.push(EventKind::Isu { var: *var, value: v });
                        go(c);
                    }
                }
                InstrKind::Assume(e) => {
                    if e.eval_bool(&cur.regs, p.domain_size).0 {
                        go(cur.clone());
                    }
                }
                InstrKind::Assign { reg, expr } => {
                    for v in expr.eval_int(&cur.regs, p.domain_size) {
                        let mut c = cur.clone();
                        c.regs[*reg] = v;
                        go(c);
                    }
                }
            }
        }
        // Reverse so that the first instruction and target are explored first.
        for (tg, c) in nexts.into_iter().rev() {
            match tg {
                Target::Label(l) => stack.push((l, c)),
                Target::Error => {
                    let mut c = c;
                    c.end = BodyEnd::Error;
                    stack.push((usize::MAX, c));
                }
                Target::Txn(_) => {}
            }
        }
    }
    out
}

/// Program counters a `commit` at `label` of transaction `txn` may lead to.
pub fn commit_targets(p: &Program, proc_: usize, txn: usize, label: LabelId) -> Vec<Pc> {
    let pr = &p.processes[proc_];
    let mut out = Vec::new();
    for i in pr.txns[txn].at(label) {
        if i.kind != InstrKind::Commit {
            continue;
        }
        if i.targets.is_empty() {
            out.push(if txn + 1 < pr.txns.len() { Pc::Boundary(txn + 1) } else { Pc::Finished });
        }
        for tg in &i.targets {
            if let Target::Txn(k) = tg {
                out.push(Pc::Boundary(*k));
            }
        }
    }
    out.dedup();
    out
}

/// Runs the next transaction of process `q` atomically (begin to commit, or
/// to the error location) from an idle state. Returns the fine-grained
/// events and the resulting state. Under SER this is the only way a
/// transaction can execute, up to the order of intermediate states.
pub fn atomic_successors(p: &Program, s: &MachineState, q: usize) -> Vec<(Vec<Event>, MachineState)> {
    let Pc::Boundary(k) = s.ls[q].pc else { return Vec::new() };
    atomic_successors_with(p, s, q, &p.processes[q].txns[k])
}

/// Like [`atomic_successors`], but runs `t` in place of the next transaction
/// of `q`. `t` must keep the labels of the transaction it replaces, since
/// commit targets are looked up in the original.
pub fn atomic_successors_with(p: &Program, s: &MachineState, q: usize, t: &Transaction) -> Vec<(Vec<Event>, MachineState)> {
    let Pc::Boundary(k) = s.ls[q].pc else { return Vec::new() };
    let ti = TxnInst { proc: q, txn: k, inst: s.ls[q].instances[k] };
    let mut out = Vec::new();
    for o in run_body(p, t, &s.ls[q].regs, &s.log) {
        let mut evs = vec![Event { kind: EventKind::Begin, txn: ti }];
        evs.extend(o.events.iter().map(|&kind| Event { kind, txn: ti }));
        let mut n = s.clone();
        n.ls[q].regs = o.regs.clone();
        n.ls[q].instances[k] += 1;
        match o.end {
            BodyEnd::Error => {
                n.ls[q].pc = Pc::Error;
                n.ls[q].store = o.store.clone();
                n.ls[q].txnwrs = o.written.clone();
                n.ls[q].sti = n.clock;
                n.clock += 1;
                out.push((evs, n));
            }
            BodyEnd::AtCommit(label) => {
                let cts = n.clock + 1;
                n.clock += 2;
                for x in 0..n.log.len() {
                    if o.written[x] {
                        n.log[x] = o.store[x];
                        n.tstamp[x] = cts;
                    }
                }
                evs.push(Event { kind: EventKind::Com, txn: ti });
                for pc in commit_targets(p, q, k, label) {
                    let mut m = n.clone();
                    m.ls[q].pc = pc;
                    out.push((evs.clone(), m));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("event {0} is not enabled")]
    InvalidStep(usize),
}

/// Every state the event sequence can end in (several when a step has
/// nondeterministic control successors), in enumeration order.
pub fn replay_all(p: &Program, events: &[Event], mode: Mode) -> Result<Vec<MachineState>, ReplayError> {
    let mut cur = vec![initial_state(p)];
    for (i, ev) in events.iter().enumerate() {
        let mut next = Vec::new();
        let mut seen = HashSet::new();
        for s in &cur {
            if let Some(q) = s.active_proc() {
                if mode == Mode::Ser && q != ev.txn.proc {
                    continue;
                }
            }
            if ev.txn.proc >= s.ls.len() {
                continue;
            }
            for (e, n) in proc_successors(p, s, ev.txn.proc) {
                if e == *ev && seen.insert(n.clone()) {
                    next.push(n);
                }
            }
        }
        if next.is_empty() {
            return Err(ReplayError::InvalidStep(i));
        }
        cur = next;
    }
    Ok(cur)
}

/// Replays under SI and returns the first final state.
pub fn replay(p: &Program, events: &[Event]) -> Result<MachineState, ReplayError> {
    replay_all(p, events, Mode::Si).map(|mut v| v.swap_remove(0))
}

// ---------------------------------------------------------------------------
// Event text and JSON formats

pub fn event_to_text(p: &Program, e: &Event) -> String {
    let pid = &p.processes[e.txn.proc].pid;
    let tid = &p.processes[e.txn.proc].txns[e.txn.txn].tid;
    let head = |k: &str| format!("{k} {pid} {tid}[{}]", e.txn.inst);
    match e.kind {
        EventKind::Begin => head("begin"),
        EventKind::Com => head("com"),
        EventKind::Load { var, value } => format!("{} {} {value}", head("load"), p.vars[var]),
        EventKind::Isu { var, value } => format!("{} {} {value}", head("isu"), p.vars[var]),
    }
}

pub fn events_to_text(p: &Program, evs: &[Event]) -> String {
    let mut s = String::new();
    for e in evs {
        s.push_str(&event_to_text(p, e));
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {msg}")]
pub struct EventParseError {
    pub line: usize,
    pub msg: String,
}

fn resolve_txn(p: &Program, pid: &str, tid_inst: &str) -> Result<TxnInst, String> {
    let proc_ = p.proc_id(pid).ok_or_else(|| format!("unknown process `{pid}`"))?;
    let (tid, inst) = match tid_inst.find('[') {
        Some(i) if tid_inst.ends_with(']') => {
            let n = tid_inst[i + 1..tid_inst.len() - 1].parse::<u32>().map_err(|_| "bad instance number")?;
            (&tid_inst[..i], n)
        }
        _ => (tid_inst, 0),
    };
    let txn = p.processes[proc_]
        .txns
        .iter()
        .position(|t| t.tid == tid)
        .ok_or_else(|| format!("unknown transaction `{tid}` of {pid}"))?;
    Ok(TxnInst { proc: proc_, txn, inst })
}

pub fn event_from_text(p: &Program, line: &str) -> Result<Event, String> {
    let w: Vec<&str> = line.split_whitespace().collect();
    if w.len() < 3 {
        return Err("expected `kind pid tid[inst] ...`".into());
    }
    let txn = resolve_txn(p, w[1], w[2])?;
    let access = |w: &[&str]| -> Result<(VarId, Value), String> {
        if w.len() != 5 {
            return Err("expected `var value`".into());
        }
        let var = p.var_id(w[3]).ok_or_else(|| format!("unknown variable `{}`", w[3]))?;
        let value = w[4].parse::<Value>().map_err(|_| format!("bad value `{}`", w[4]))?;
        Ok((var, value))
    };
    let kind = match w[0] {
        "begin" if w.len() == 3 => EventKind::Begin,
        "com" if w.len() == 3 => EventKind::Com,
        "load" => {
            let (var, value) = access(&w)?;
            EventKind::Load { var, value }
        }
        "isu" => {
            let (var, value) = access(&w)?;
            EventKind::Isu { var, value }
        }
        k => return Err(format!("unknown event `{k}`")),
    };
    Ok(Event { kind, txn })
}

pub fn events_from_text(p: &Program, text: &str) -> Result<Vec<Event>, EventParseError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(event_from_text(p, line).map_err(|msg| EventParseError { line: i + 1, msg })?);
    }
    Ok(out)
}

/// Name-based JSON form of an event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventJson {
    pub kind: String,
    pub pid: String,
    pub tid: String,
    pub inst: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub var: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub value: Option<Value>,
}

pub fn event_to_json(p: &Program, e: &Event) -> EventJson {
    let (kind, var, value) = match e.kind {
        EventKind::Begin => ("begin", None, None),
        EventKind::Com => ("com", None, None),
        EventKind::Load { var, value } => ("load", Some(p.vars[var].clone()), Some(value)),
        EventKind::Isu { var, value } => ("isu", Some(p.vars[var].clone()), Some(value)),
    };
    EventJson {
        kind: kind.into(),
        pid: p.processes[e.txn.proc].pid.clone(),
        tid: p.processes[e.txn.proc].txns[e.txn.txn].tid.clone(),
        inst: e.txn.inst,
        var,
        value,
    }
}

pub fn events_to_json(p: &Program, evs: &[Event]) -> String {
    let v: Vec<EventJson> = evs.iter().map(|e| event_to_json(p, e)).collect();
    serde_json::to_string(&v).expect("events serialize")
}

pub fn events_from_json(p: &Program, text: &str) -> Result<Vec<Event>, String> {
    let v: Vec<EventJson> = serde_json::from_str(text).map_err(|e| e.to_string())?;
    v.iter()
        .map(|j| {
            let mut line = format!("{} {} {}[{}]", j.kind, j.pid, j.tid, j.inst);
            if let (Some(var), Some(val)) = (&j.var, j.value) {
                line.push_str(&format!(" {var} {val}"));
            }
            event_from_text(p, &line)
        })
        .collect()
}

/// Start and commit timestamps of every instance, reconstructed from event
/// order exactly as the machine assigns them (each begin and each commit
/// takes the next clock value, starting at 1).
pub fn timestamps(events: &[Event]) -> Vec<(TxnInst, u64, Option<u64>)> {
    let mut out: Vec<(TxnInst, u64, Option<u64>)> = Vec::new();
    let mut clock = 1;
    for e in events {
        match e.kind {
            EventKind::Begin => {
                out.push((e.txn, clock, None));
                clock += 1;
            }
            EventKind::Com => {
                if let Some(r) = out.iter_mut().rev().find(|r| r.0 == e.txn) {
                    r.2 = Some(clock);
                }
                clock += 1;
            }
            _ => {}
        }
    }
    out
}

/// Transactions with a `com` event, in commit order.
pub fn committed(events: &[Event]) -> Vec<TxnInst> {
    events.iter().filter(|e| e.kind == EventKind::Com).map(|e| e.txn).collect()
}

/// Drops every event of transactions that never commit. The result is again
/// a valid SI run: uncommitted work is invisible to everyone else.
pub fn committed_projection(events: &[Event]) -> Vec<Event> {
    let done: BTreeSet<TxnInst> = committed(events).into_iter().collect();
    events.iter().copied().filter(|e| done.contains(&e.txn)).collect()
}

impl fmt::Display for Pc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pc::Boundary(t) => write!(f, "boundary({t})"),
            Pc::In { txn, label } => write!(f, "in({txn},{label})"),
            Pc::Finished => write!(f, "finished"),
            Pc::Error => write!(f, "error"),
        }
    }
}

/// Evaluates a boolean predicate over a state: registers are looked up as
/// `pid.reg` or by bare name when unambiguous, shared variables by name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Atom {
    Reg { proc: usize, reg: usize },
    Var(VarId),
}

/// A conjunction/disjunction of `atom == value` / `atom != value` literals,
/// the language accepted by `run --assert`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StatePred {
    Cmp { atom: Atom, eq: bool, value: Value },
    And(Vec<StatePred>),
    Or(Vec<StatePred>),
    Not(Box<StatePred>),
    True,
}

impl StatePred {
    pub fn eval(&self, s: &MachineState) -> bool {
        match self {
            StatePred::Cmp { atom, eq, value } => {
                let v = match atom {
                    Atom::Reg { proc, reg } => s.ls[*proc].regs[*reg],
                    Atom::Var(x) => s.log[*x],
                };
                (v == *value) == *eq
            }
            StatePred::And(v) => v.iter().all(|q| q.eval(s)),
            StatePred::Or(v) => v.iter().any(|q| q.eval(s)),
            StatePred::Not(q) => !q.eval(s),
            StatePred::True => true,
        }
    }

    /// Parses `r1=0 && r2=0`, `p1.r1 == 0 || x != 1`, `!(x=1)`.
    pub fn parse(p: &Program, src: &str) -> Result<StatePred, String> {
        let toks = pred_tokens(src)?;
        let mut pos = 0;
        let e = pred_or(p, &toks, &mut pos)?;
        if pos != toks.len() {
            return Err(format!("unexpected `{}`", toks[pos]));
        }
        Ok(e)
    }
}

fn pred_tokens(src: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let cs: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '\'' | '@') {
            let st = i;
            while i < cs.len() && (cs[i].is_ascii_alphanumeric() || matches!(cs[i], '_' | '.' | '\'' | '@')) {
                i += 1;
            }
            out.push(cs[st..i].iter().collect());
        } else {
            let two: String = cs[i..cs.len().min(i + 2)].iter().collect();
            if ["&&", "||", "==", "!="].contains(&two.as_str()) {
                out.push(two);
                i += 2;
            } else if "()=!".contains(c) {
                out.push(c.to_string());
                i += 1;
            } else {
                return Err(format!("unexpected character `{c}`"));
            }
        }
    }
    Ok(out)
}

fn pred_or(p: &Program, t: &[String], pos: &mut usize) -> Result<StatePred, String> {
    let mut v = vec![pred_and(p, t, pos)?];
    while t.get(*pos).map(String::as_str) == Some("||") {
        *pos += 1;
        v.push(pred_and(p, t, pos)?);
    }
    Ok(if v.len() == 1 { v.pop().unwrap() } else { StatePred::Or(v) })
}

fn pred_and(p: &Program, t: &[String], pos: &mut usize) -> Result<StatePred, String> {
    let mut v = vec![pred_atom(p, t, pos)?];
    while t.get(*pos).map(String::as_str) == Some("&&") {
        *pos += 1;
        v.push(pred_atom(p, t, pos)?);
    }
    Ok(if v.len() == 1 { v.pop().unwrap() } else { StatePred::And(v) })
}

fn pred_atom(p: &Program, t: &[String], pos: &mut usize) -> Result<StatePred, String> {
    let tok = t.get(*pos).ok_or("unexpected end of predicate")?.clone();
    *pos += 1;
    match tok.as_str() {
        "!" => Ok(StatePred::Not(Box::new(pred_atom(p, t, pos)?))),
        "(" => {
            let e = pred_or(p, t, pos)?;
            if t.get(*pos).map(String::as_str) != Some(")") {
                return Err("expected `)`".into());
            }
            *pos += 1;
            Ok(e)
        }
        "true" => Ok(StatePred::True),
        name => {
            let atom = resolve_atom(p, name)?;
            let op = t.get(*pos).ok_or("expected comparison")?.clone();
            *pos += 1;
            let eq = match op.as_str() {
                "=" | "==" => true,
                "!=" => false,
                o => return Err(format!("expected `=` or `!=`, found `{o}`")),
            };
            let v = t.get(*pos).ok_or("expected value")?;
            *pos += 1;
            let value = v.parse::<Value>().map_err(|_| format!("bad value `{v}`"))?;
            Ok(StatePred::Cmp { atom, eq, value })
        }
    }
}

fn resolve_atom(p: &Program, name: &str) -> Result<Atom, String> {
    if let Some(x) = p.var_id(name) {
        return Ok(Atom::Var(x));
    }
    if let Some((pid, reg)) = name.split_once('.') {
        if let Some(q) = p.proc_id(pid) {
            if let Some(r) = p.processes[q].regs.iter().position(|x| x == reg) {
                return Ok(Atom::Reg { proc: q, reg: r });
            }
        }
    }
    let hits: Vec<Atom> = p
        .processes
        .iter()
        .enumerate()
        .filter_map(|(q, pr)| pr.regs.iter().position(|x| x == name).map(|r| Atom::Reg { proc: q, reg: r }))
        .collect();
    match hits.len() {
        1 => Ok(hits.into_iter().next().unwrap()),
        0 => Err(format!("unknown register or variable `{name}`")),
        _ => Err(format!("register `{name}` is ambiguous; qualify it as pid.{name}")),
    }
}

/// Convenience for tests and examples: evaluates `e` deterministically.
pub fn eval_det(e: &Expr, regs: &[Value], domain: usize) -> Option<Value> {
    e.eval_det(regs, domain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_program;

    fn ws() -> Program {
        parse_program(include_str!("../corpus/ws.txn")).unwrap()
    }

    #[test]
    fn initial_state_is_zeroed() {
        let p = ws();
        let s = initial_state(&p);
        assert_eq!(s.log, vec![0, 0]);
        assert_eq!(s.tstamp, vec![0, 0]);
        assert_eq!(s.clock, 1);
        assert!(initial_state(&Program::empty("e")).ls.is_empty());
    }

    #[test]
    fn both_reads_see_zero_after_two_begins() {
        let p = ws();
        let s0 = initial_state(&p);
        let (_, s1) = enabled_si(&p, &s0).into_iter().find(|(e, _)| e.txn.proc == 0).unwrap();
        let (_, s2) = enabled_si(&p, &s1).into_iter().find(|(e, _)| e.txn.proc == 1).unwrap();
        let loads: Vec<Event> =
            enabled_si(&p, &s2).into_iter().map(|(e, _)| e).filter(|e| matches!(e.kind, EventKind::Load { .. })).collect();
        assert_eq!(loads.len(), 2);
        assert!(loads.iter().all(|e| matches!(e.kind, EventKind::Load { value: 0, .. })));
    }

    #[test]
    fn conflicting_commit_is_pruned() {
        let src = "program\nvars x\nprocess p regs r\n txn a\n l0: begin;\n l1: x := 1;\n l2: commit;\n\
                   process q regs r\n txn b\n l0: begin;\n l1: x := 1;\n l2: commit;\n";
        let p = parse_program(src).unwrap();
        let evs = events_from_text(&p, "begin p a[0]\nbegin q b[0]\nisu p a[0] x 1\nisu q b[0] x 1\ncom p a[0]\n").unwrap();
        let s = replay(&p, &evs).unwrap();
        assert!(enabled_si(&p, &s).is_empty());
    }

    #[test]
    fn replay_rejects_commit_before_begin() {
        let p = ws();
        let evs = events_from_text(&p, "com p1 t1[0]\n").unwrap();
        assert_eq!(replay(&p, &evs), Err(ReplayError::InvalidStep(0)));
    }

    #[test]
    fn event_text_round_trip() {
        let p = ws();
        let text = "begin p1 t1[0]\nload p1 t1[0] y 0\nisu p1 t1[0] x 1\ncom p1 t1[0]\n";
        let evs = events_from_text(&p, text).unwrap();
        assert_eq!(events_to_text(&p, &evs), text);
        assert_eq!(events_from_json(&p, &events_to_json(&p, &evs)).unwrap(), evs);
    }

    #[test]
    fn predicate_parsing() {
        let p = ws();
        let q = StatePred::parse(&p, "r1=0&&r2=0").unwrap();
        assert!(q.eval(&initial_state(&p)));
        assert!(StatePred::parse(&p, "p1.r1 == 0 || !(x = 1)").is_ok());
        assert!(StatePred::parse(&p, "zz = 1").is_err());
    }
}
