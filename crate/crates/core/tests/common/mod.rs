//! Brute-force oracles shared by the integration tests. They are written
//! against raw event sequences and avoid the library's trace and search code.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use sirobust::ir::{parse_program, InstrKind, Program, VarId};
use sirobust::semantics::{enumerate_executions, Dedup, Event, EventKind, Mode, TxnInst};
use sirobust::traces::{is_serializable, trace_of};

pub fn corpus(name: &str) -> Program {
    let path = format!("{}/corpus/{name}.txn", env!("CARGO_MANIFEST_DIR"));
    parse_program(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

pub const CORPUS: [&str; 10] = [
    "ws",
    "ws_variant",
    "robsto",
    "robrfo",
    "rwc",
    "guarded_swap",
    "smallbank_mini",
    "courseware_mini",
    "playlist_mini",
    "empty",
];

/// A committed transaction as seen in a raw SI event sequence.
#[derive(Debug, Clone)]
pub struct RawTxn {
    pub id: TxnInst,
    pub begin: usize,
    pub com: usize,
    /// Variables read before the transaction wrote them.
    pub reads: BTreeSet<VarId>,
    pub writes: BTreeSet<VarId>,
}

pub fn raw_txns(events: &[Event]) -> Vec<RawTxn> {
    let mut out: BTreeMap<TxnInst, RawTxn> = BTreeMap::new();
    let committed: BTreeSet<TxnInst> = events.iter().filter(|e| e.kind == EventKind::Com).map(|e| e.txn).collect();
    for (i, e) in events.iter().enumerate() {
        if !committed.contains(&e.txn) {
            continue;
        }
        let t = out.entry(e.txn).or_insert(RawTxn {
            id: e.txn,
            begin: i,
            com: 0,
            reads: BTreeSet::new(),
            writes: BTreeSet::new(),
        });
        match e.kind {
            EventKind::Begin => t.begin = i,
            EventKind::Com => t.com = i,
            EventKind::Load { var, .. } => {
                if !t.writes.contains(&var) {
                    t.reads.insert(var);
                }
            }
            EventKind::Isu { var, .. } => {
                t.writes.insert(var);
            }
        }
    }
    out.into_values().collect()
}

/// Snapshot source of each external read: the writer of `x` that committed
/// last before the reader began, or `None` for the initial value.
pub fn rf_sources(txns: &[RawTxn]) -> BTreeMap<(usize, VarId), Option<usize>> {
    let mut m = BTreeMap::new();
    for (i, t) in txns.iter().enumerate() {
        for &x in &t.reads {
            let src = txns
                .iter()
                .enumerate()
                .filter(|(j, u)| *j != i && u.writes.contains(&x) && u.com < t.begin)
                .max_by_key(|(_, u)| u.com)
                .map(|(j, _)| j);
            m.insert((i, x), src);
        }
    }
    m
}

/// Value-blind serializability by brute force: some order of the committed
/// transactions respects program order, orders the writers of every
/// variable as their commits are ordered, and lets every external read see
/// the same writer it saw under SI.
pub fn perm_serializable(events: &[Event]) -> bool {
    let txns = raw_txns(events);
    let rf = rf_sources(&txns);
    let n = txns.len();
    let mut order = Vec::new();
    let mut used = vec![false; n];
    fn go(
        txns: &[RawTxn],
        rf: &BTreeMap<(usize, VarId), Option<usize>>,
        order: &mut Vec<usize>,
        used: &mut [bool],
    ) -> bool {
        let n = txns.len();
        if order.len() == n {
            return true;
        }
        for i in 0..n {
            if used[i] {
                continue;
            }
            let t = &txns[i];
            // Program order: earlier instances of the same process first.
            if txns.iter().enumerate().any(|(j, u)| !used[j] && j != i && u.id.proc == t.id.proc && u.begin < t.begin) {
                continue;
            }
            // Writers of a common variable in commit order.
            if txns.iter().enumerate().any(|(j, u)| !used[j] && j != i && u.com < t.com && !u.writes.is_disjoint(&t.writes)) {
                continue;
            }
            // Each external read sees the last writer placed so far.
            let ok = t.reads.iter().all(|&x| {
                let last = order.iter().rev().copied().find(|&j| txns[j].writes.contains(&x));
                last == rf[&(i, x)]
            });
            if !ok {
                continue;
            }
            used[i] = true;
            order.push(i);
            if go(txns, rf, order, used) {
                return true;
            }
            order.pop();
            used[i] = false;
        }
        false
    }
    go(&txns, &rf, &mut order, &mut used)
}

/// Robustness by checking the trace of every maximal SI execution.
pub fn brute_robust(p: &Program, value_aware: bool) -> bool {
    enumerate_executions(p, Mode::Si, None)
        .dedup(Dedup::None)
        .all(|e| is_serializable(&trace_of(p, &e.events, value_aware).unwrap()))
}

/// Number of interleavings of independent sequences of the given lengths.
pub fn multinomial(lens: &[usize]) -> u128 {
    let mut total = 0usize;
    let mut acc: u128 = 1;
    for &l in lens {
        for k in 1..=l {
            total += 1;
            acc = acc * total as u128 / k as u128;
        }
    }
    acc
}

/// Straight-line programs without guards where every variable is written
/// by at most one process: no transaction can block or fail to commit.
pub fn conflict_free(p: &Program) -> bool {
    let mut writer: BTreeMap<VarId, usize> = BTreeMap::new();
    for (pi, pr) in p.processes.iter().enumerate() {
        for t in &pr.txns {
            for i in &t.instrs {
                match &i.kind {
                    InstrKind::Assume(_) => return false,
                    InstrKind::Write { var, .. }
                        if *writer.entry(*var).or_insert(pi) != pi => {
                            return false;
                        }
                    _ => {}
                }
                if i.targets.len() > 1 {
                    return false;
                }
            }
        }
    }
    true
}

/// Events per transaction of a straight-line transaction: begin, one per
/// access, and the commit.
pub fn straight_line_events(p: &Program, proc_: usize) -> usize {
    p.processes[proc_].txns.iter().map(|t| t.access_count() + 2).sum()
}
