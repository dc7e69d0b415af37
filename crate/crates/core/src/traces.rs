//! Traces, happens-before, and enumerative robustness checking.
//!
//! A trace abstracts an SI execution into one issue event per transaction
//! (placed at its `begin`, standing for all its reads and writes) and one
//! commit event, related by:
//!
//! * `po`: issue to issue, same process, in order;
//! * `rf`: commit of the writer a transaction read from, to the reader's issue;
//! * `ww`: commit to commit, writers of the same variable in commit order;
//! * `rw`: reader's issue to the commit of a writer that overwrote the value
//!   it read;
//! * `sametr`: issue to commit of the same transaction.
//!
//! Happens-before is the transitive closure of their union. A trace is
//! serializable iff happens-before lifted to transactions is acyclic.
//!
//! In the value-aware variant, writes of equal values that are adjacent in
//! commit order form one block (the initial value 0 opens the first block).
//! `ww` only relates writers of different blocks, `rf` comes from the first
//! writer of the block that was current at the reader's snapshot, and `rw`
//! goes to writers of strictly later blocks. Writing back a value that was
//! just read and left unchanged by everyone else then creates no conflict.
//!
//! Only committed transactions appear in a trace.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{LabelId, Program, Value, VarId};
use crate::semantics::{
    commit_targets, committed_projection, replay_all, run_body, BodyEnd, Event, EventKind, Mode, Pc, TxnInst,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rel {
    Po,
    Rf,
    Ww,
    Rw,
    Sametr,
}

/// A summary event: the issue (`com == false`) or the commit of a transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceEvent {
    pub txn: TxnInst,
    pub com: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub rel: Rel,
    pub var: Option<VarId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub value_aware: bool,
    /// Committed transactions in begin order.
    pub txns: Vec<TxnInst>,
    /// Summary events in execution order; indices into this vector are used
    /// by [`Edge`].
    pub events: Vec<TraceEvent>,
    pub edges: Vec<Edge>,
    /// Variables each transaction reads before writing them, with the value.
    pub reads: Vec<BTreeMap<VarId, Value>>,
    /// Final value each transaction writes to each variable it writes.
    pub writes: Vec<BTreeMap<VarId, Value>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("malformed execution at event {index}: {msg}")]
    Malformed { index: usize, msg: String },
}

impl Trace {
    pub fn txn_index(&self, t: TxnInst) -> Option<usize> {
        self.txns.iter().position(|&u| u == t)
    }

    pub fn isu_of(&self, t: TxnInst) -> Option<usize> {
        self.events.iter().position(|e| e.txn == t && !e.com)
    }

    pub fn com_of(&self, t: TxnInst) -> Option<usize> {
        self.events.iter().position(|e| e.txn == t && e.com)
    }

    /// Direct edges of one relation as `(from txn, to txn)` pairs.
    pub fn relation(&self, rel: Rel) -> BTreeSet<(TxnInst, TxnInst)> {
        self.edges
            .iter()
            .filter(|e| e.rel == rel)
            .map(|e| (self.events[e.from].txn, self.events[e.to].txn))
            .collect()
    }

    /// Transaction-level graph: `u -> v` iff some event of `u` is directly
    /// related to some event of `v`, `u != v`. Indices follow `txns`.
    pub fn txn_graph(&self) -> Vec<BTreeSet<usize>> {
        let idx: BTreeMap<TxnInst, usize> = self.txns.iter().enumerate().map(|(i, t)| (*t, i)).collect();
        let mut g = vec![BTreeSet::new(); self.txns.len()];
        for e in &self.edges {
            let a = idx[&self.events[e.from].txn];
            let b = idx[&self.events[e.to].txn];
            if a != b {
                g[a].insert(b);
            }
        }
        g
    }
}

/// Builds the trace of an SI execution. Events of transactions that never
/// commit are dropped first.
pub fn trace_of(p: &Program, events: &[Event], value_aware: bool) -> Result<Trace, TraceError> {
    let proj = committed_projection(events);
    let mut txns: Vec<TxnInst> = Vec::new();
    let mut sev: Vec<TraceEvent> = Vec::new();
    let mut reads: Vec<BTreeMap<VarId, Value>> = Vec::new();
    let mut writes: Vec<BTreeMap<VarId, Value>> = Vec::new();
    let mut open: BTreeMap<TxnInst, usize> = BTreeMap::new();
    let bad = |index: usize, msg: &str| TraceError::Malformed { index, msg: msg.to_string() };
    for (i, e) in proj.iter().enumerate() {
        match e.kind {
            EventKind::Begin => {
                if txns.contains(&e.txn) {
                    return Err(bad(i, "transaction instance begins twice"));
                }
                if e.txn.proc >= p.processes.len() || e.txn.txn >= p.processes[e.txn.proc].txns.len() {
                    return Err(bad(i, "unknown transaction"));
                }
                open.insert(e.txn, txns.len());
                txns.push(e.txn);
                reads.push(BTreeMap::new());
                writes.push(BTreeMap::new());
                sev.push(TraceEvent { txn: e.txn, com: false });
            }
            EventKind::Load { var, value } => {
                let k = *open.get(&e.txn).ok_or_else(|| bad(i, "load outside its transaction"))?;
                match writes[k].get(&var) {
                    Some(&w) if w != value => return Err(bad(i, "load does not see the transaction's own write")),
                    Some(_) => {}
                    None => match reads[k].get(&var) {
                        Some(&r) if r != value => return Err(bad(i, "two loads of one snapshot disagree")),
                        _ => {
                            reads[k].insert(var, value);
                        }
                    },
                }
            }
            EventKind::Isu { var, value } => {
                let k = *open.get(&e.txn).ok_or_else(|| bad(i, "isu outside its transaction"))?;
                writes[k].insert(var, value);
            }
            EventKind::Com => {
                open.remove(&e.txn).ok_or_else(|| bad(i, "commit outside its transaction"))?;
                sev.push(TraceEvent { txn: e.txn, com: true });
            }
        }
    }
    let n = txns.len();
    let tidx: BTreeMap<TxnInst, usize> = txns.iter().enumerate().map(|(i, t)| (*t, i)).collect();
    let mut isu = vec![0; n];
    let mut com = vec![0; n];
    for (i, e) in sev.iter().enumerate() {
        if e.com {
            com[tidx[&e.txn]] = i;
        } else {
            isu[tidx[&e.txn]] = i;
        }
    }

    // Blocks per variable: (value, writers in commit order). Block 0 is the
    // initial value and has no writer.
    let nv = p.vars.len();
    let mut blocks: Vec<Vec<(Value, Vec<usize>)>> = vec![vec![(0, Vec::new())]; nv];
    let mut block_of_write: Vec<BTreeMap<VarId, usize>> = vec![BTreeMap::new(); n];
    let mut source: Vec<BTreeMap<VarId, usize>> = vec![BTreeMap::new(); n];
    for (i, e) in sev.iter().enumerate() {
        let k = tidx[&e.txn];
        if !e.com {
            for (&x, &v) in &reads[k] {
                let (cur, _) = blocks[x].last().unwrap();
                if *cur != v {
                    return Err(bad(i, "load value differs from the snapshot"));
                }
                source[k].insert(x, blocks[x].len() - 1);
            }
        } else {
            for (&x, &v) in &writes[k] {
                let join = value_aware && blocks[x].last().unwrap().0 == v;
                if !join {
                    blocks[x].push((v, Vec::new()));
                }
                let b = blocks[x].len() - 1;
                blocks[x][b].1.push(k);
                block_of_write[k].insert(x, b);
            }
        }
    }

    let mut edges = BTreeSet::new();
    for a in 0..n {
        edges.insert(Edge { from: isu[a], to: com[a], rel: Rel::Sametr, var: None });
        for b in 0..n {
            if a != b && txns[a].proc == txns[b].proc && isu[a] < isu[b] {
                edges.insert(Edge { from: isu[a], to: isu[b], rel: Rel::Po, var: None });
            }
        }
    }
    for x in 0..nv {
        let bl = &blocks[x];
        for (bi, (_, ws)) in bl.iter().enumerate() {
            for (_, ws2) in bl.iter().skip(bi + 1) {
                for &w1 in ws {
                    for &w2 in ws2 {
                        edges.insert(Edge { from: com[w1], to: com[w2], rel: Rel::Ww, var: Some(x) });
                    }
                }
            }
        }
    }
    for r in 0..n {
        for (&x, &b) in &source[r] {
            // Block 0 is sourced by the virtual initial writer, even when
            // later writers of the initial value joined it.
            if let Some(&f) = blocks[x][b].1.first().filter(|_| b > 0) {
                edges.insert(Edge { from: com[f], to: isu[r], rel: Rel::Rf, var: Some(x) });
            }
            for (_, ws) in blocks[x].iter().skip(b + 1) {
                for &w in ws {
                    if w != r {
                        edges.insert(Edge { from: isu[r], to: com[w], rel: Rel::Rw, var: Some(x) });
                    }
                }
            }
        }
    }
    Ok(Trace { value_aware, txns, events: sev, edges: edges.into_iter().collect(), reads, writes })
}

/// Event-level happens-before: `hb[a][b]` iff `b` is reachable from `a`
/// through at least one edge.
pub fn happens_before(t: &Trace) -> Vec<Vec<bool>> {
    let n = t.events.len();
    let mut adj = vec![Vec::new(); n];
    for e in &t.edges {
        adj[e.from].push(e.to);
    }
    (0..n)
        .map(|s| {
            let mut seen = vec![false; n];
            let mut q: VecDeque<usize> = adj[s].iter().copied().collect();
            while let Some(v) = q.pop_front() {
                if !seen[v] {
                    seen[v] = true;
                    q.extend(adj[v].iter().copied());
                }
            }
            seen
        })
        .collect()
}

/// Happens-before lifted to transactions, without the trivial self pairs.
pub fn hb_txn(t: &Trace) -> BTreeSet<(TxnInst, TxnInst)> {
    let hb = happens_before(t);
    let mut out = BTreeSet::new();
    for (a, row) in hb.iter().enumerate() {
        for (b, &r) in row.iter().enumerate() {
            let (ta, tb) = (t.events[a].txn, t.events[b].txn);
            if r && ta != tb {
                out.insert((ta, tb));
            }
        }
    }
    out
}

pub fn is_serializable(t: &Trace) -> bool {
    find_cycle(t).is_none()
}

/// The lexicographically least simple cycle of the transaction graph,
/// starting at its least transaction, or `None` when the graph is acyclic.
pub fn find_cycle(t: &Trace) -> Option<Vec<TxnInst>> {
    let g = t.txn_graph();
    let mut order: Vec<usize> = (0..t.txns.len()).collect();
    order.sort_by_key(|&i| t.txns[i]);
    let rank: Vec<usize> = {
        let mut r = vec![0; order.len()];
        for (k, &i) in order.iter().enumerate() {
            r[i] = k;
        }
        r
    };
    // Adjacency in rank space, sorted ascending.
    let adj: Vec<Vec<usize>> = order.iter().map(|&i| g[i].iter().map(|&j| rank[j]).collect::<BTreeSet<_>>().into_iter().collect()).collect();
    let n = adj.len();
    for s in 0..n {
        // Nodes above `s` that can reach `s` using only nodes above `s`.
        let mut back = vec![false; n];
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for u in s + 1..n {
                if !back[u] && adj[u].contains(&v) {
                    back[u] = true;
                    stack.push(u);
                }
            }
        }
        let mut path = vec![s];
        let mut on = vec![false; n];
        on[s] = true;
        if let Some(c) = least_cycle_from(&adj, s, &back, &mut path, &mut on) {
            return Some(c.into_iter().map(|k| t.txns[order[k]]).collect());
        }
    }
    None
}

fn least_cycle_from(adj: &[Vec<usize>], s: usize, back: &[bool], path: &mut Vec<usize>, on: &mut [bool]) -> Option<Vec<usize>> {
    let v = *path.last().unwrap();
    for &u in &adj[v] {
        if u == s {
            return Some(path.clone());
        }
        if u > s && back[u] && !on[u] {
            on[u] = true;
            path.push(u);
            if let Some(c) = least_cycle_from(adj, s, back, path, on) {
                return Some(c);
            }
            path.pop();
            on[u] = false;
        }
    }
    None
}

/// Whether `a` happens before `b` through the events `window`: there is a
/// non-empty chain `a -> c1 -> ... -> cn -> b` of direct edges with every
/// `ci` in `window`.
pub fn hb_through(t: &Trace, a: usize, b: usize, window: &BTreeSet<usize>) -> bool {
    let mut adj = vec![Vec::new(); t.events.len()];
    for e in &t.edges {
        adj[e.from].push(e.to);
    }
    let mut seen = BTreeSet::new();
    let mut q: VecDeque<usize> = adj[a].iter().copied().filter(|c| window.contains(c)).collect();
    while let Some(c) = q.pop_front() {
        if !seen.insert(c) {
            continue;
        }
        if adj[c].contains(&b) {
            return true;
        }
        q.extend(adj[c].iter().copied().filter(|d| window.contains(d)));
    }
    false
}

fn rel_name(r: Rel) -> &'static str {
    match r {
        Rel::Po => "po",
        Rel::Rf => "rf",
        Rel::Ww => "ww",
        Rel::Rw => "rw",
        Rel::Sametr => "sametr",
    }
}

/// Graphviz rendering: one node per summary event, edges labeled with the
/// relation and variable.
pub fn trace_to_dot(p: &Program, t: &Trace) -> String {
    let mut s = String::from("digraph trace {\n  rankdir=LR;\n");
    for (i, e) in t.events.iter().enumerate() {
        let k = if e.com { "com" } else { "isu" };
        let _ = writeln!(s, "  e{i} [label=\"{k}({}, {})\"];", p.processes[e.txn.proc].pid, e.txn.name(p));
    }
    for e in &t.edges {
        if e.rel == Rel::Sametr {
            let _ = writeln!(s, "  e{} -> e{} [style=dotted];", e.from, e.to);
            continue;
        }
        let lbl = match e.var {
            Some(x) => format!("{}({})", rel_name(e.rel), p.vars[x]),
            None => rel_name(e.rel).to_string(),
        };
        let _ = writeln!(s, "  e{} -> e{} [label=\"{lbl}\"];", e.from, e.to);
    }
    s.push_str("}\n");
    s
}

/// Name-based JSON form of a trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceJson {
    pub value_aware: bool,
    pub events: Vec<TraceEventJson>,
    pub edges: Vec<EdgeJson>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEventJson {
    pub kind: String,
    pub pid: String,
    pub txn: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeJson {
    pub from: usize,
    pub to: usize,
    pub rel: Rel,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub var: Option<String>,
}

pub fn trace_to_json(p: &Program, t: &Trace) -> TraceJson {
    TraceJson {
        value_aware: t.value_aware,
        events: t
            .events
            .iter()
            .map(|e| TraceEventJson {
                kind: if e.com { "com" } else { "isu" }.into(),
                pid: p.processes[e.txn.proc].pid.clone(),
                txn: e.txn.name(p),
            })
            .collect(),
        edges: t
            .edges
            .iter()
            .map(|e| EdgeJson { from: e.from, to: e.to, rel: e.rel, var: e.var.map(|x| p.vars[x].clone()) })
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Enumerative robustness checking
//
// The search runs over macro steps: `issue(p)` executes the whole body of the
// next transaction of `p` on a fresh snapshot and parks it at its commit
// point, `commit(p)` publishes it. Since SI reads and writes only touch the
// local store, every SI execution has the trace of some macro-step execution
// and vice versa.
//
// A cycle in the transaction graph always closes at the commit of its last
// committed member, through an edge into that commit. For every pending
// transaction `t` the search therefore keeps a small summary of the set R(t)
// of committed transactions reachable from `t`, and checks at `t`'s commit
// whether some member of R(t) has an edge into `t`:
//
// * `po[q]`: R(t) has a transaction of process `q`;
// * `srcr[q]`: per variable, the transaction pending in `q` read it from a
//   member of R(t);
// * `fw`: per variable, the first writer of the current block is in R(t);
// * `cbw`/`pbw`: per variable, R(t) has a writer in the current/previous block;
// * `cbr`/`pbr`: per variable, R(t) has a reader of the current/previous block.
//
// Older blocks need no bits: a member of R(t) writing or reading an older
// block has an edge to every writer of the next block, so those are in R(t)
// too. Value-blind checking is the special case where every write opens a
// new block.

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Tokens {
    po: u64,
    fw: u64,
    cbw: u64,
    pbw: u64,
    cbr: u64,
    pbr: u64,
    srcr: Vec<u64>,
}

impl Tokens {
    fn empty(procs: usize) -> Tokens {
        Tokens { po: 0, fw: 0, cbw: 0, pbw: 0, cbr: 0, pbr: 0, srcr: vec![0; procs] }
    }

    fn merge(&mut self, o: &Tokens) {
        self.po |= o.po;
        self.fw |= o.fw;
        self.cbw |= o.cbw;
        self.pbw |= o.pbw;
        self.cbr |= o.cbr;
        self.pbr |= o.pbr;
        for (a, b) in self.srcr.iter_mut().zip(&o.srcr) {
            *a |= b;
        }
    }

    /// Whether a member of the summarized set has an edge into the
    /// transaction `w` of process `q` committing now. `nb` marks the written
    /// variables whose write opens a new block.
    fn reaches(&self, q: usize, w: &Pending, nb: u64) -> bool {
        self.po & (1 << q) != 0
            || self.srcr[q] & w.ext != 0
            || nb & (self.cbw | self.cbr) != 0
            || (w.written & !nb) & (self.pbw | self.pbr) != 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Pending {
    txn: usize,
    inst: u32,
    label: LabelId,
    store: Vec<Value>,
    written: u64,
    ext: u64,
    /// Blocks opened on each variable since the snapshot, saturating at 2.
    age: Vec<u8>,
    /// Variables committed by others since the snapshot.
    dirty: u64,
    tok: Tokens,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct ProcSt {
    pc: Pc,
    regs: Vec<Value>,
    instances: Vec<u32>,
    pend: Option<Pending>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct EState {
    procs: Vec<ProcSt>,
    log: Vec<Value>,
    delayed: usize,
}

impl EState {
    fn key(&self) -> Vec<u8> {
        let mut k = Vec::new();
        let put64 = |k: &mut Vec<u8>, v: u64| k.extend_from_slice(&v.to_le_bytes());
        k.extend_from_slice(&self.log);
        k.push(self.delayed as u8);
        for ps in &self.procs {
            match ps.pc {
                Pc::Boundary(t) => k.extend_from_slice(&[0, t as u8, (t >> 8) as u8]),
                Pc::Finished => k.push(1),
                Pc::Error => k.push(2),
                Pc::In { .. } => k.push(3),
            }
            k.extend_from_slice(&ps.regs);
            if let Some(w) = &ps.pend {
                k.push(4);
                k.extend_from_slice(&(w.txn as u16).to_le_bytes());
                k.extend_from_slice(&(w.label as u16).to_le_bytes());
                for (x, v) in w.store.iter().enumerate() {
                    k.push(if w.written & (1 << x) != 0 { *v } else { 0 });
                }
                put64(&mut k, w.written);
                put64(&mut k, w.ext);
                put64(&mut k, w.dirty);
                for (x, a) in w.age.iter().enumerate() {
                    k.push(if w.ext & (1 << x) != 0 { *a } else { 0 });
                }
                let t = &w.tok;
                for v in [t.po, t.fw, t.cbw, t.pbw, t.cbr, t.pbr] {
                    put64(&mut k, v);
                }
                for v in &t.srcr {
                    put64(&mut k, *v);
                }
            }
        }
        k
    }
}

/// Options for [`check_robustness`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[derive(Default)]
pub struct EnumOptions {
    pub value_aware: bool,
    /// Maximum number of macro steps (issue or commit) along a path.
    pub bound: Option<usize>,
    /// When set, at most this many transactions may have other transactions
    /// run between their issue and commit; all others run atomically.
    pub max_delayed: Option<usize>,
}


/// A non-serializable SI execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    /// Committed events only, valid under SI.
    pub events: Vec<Event>,
    pub trace: Trace,
    pub cycle: Vec<TxnInst>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumResult {
    pub robust: bool,
    /// Some path was cut by the bound, so `robust` only covers executions
    /// within it.
    pub bound_hit: bool,
    pub states: usize,
    pub witness: Option<Witness>,
}

pub fn check_robustness_enumerative(p: &Program, value_aware: bool, bound: Option<usize>) -> EnumResult {
    check_robustness(p, &EnumOptions { value_aware, bound, max_delayed: None })
}

struct Step {
    events: Vec<Event>,
    next: EState,
    cycle: bool,
}

struct Engine<'a> {
    p: &'a Program,
    opts: EnumOptions,
}

fn mask(v: &[bool]) -> u64 {
    v.iter().enumerate().fold(0, |m, (i, &b)| if b { m | (1 << i) } else { m })
}

impl<'a> Engine<'a> {
    fn initial(&self) -> EState {
        let procs = self
            .p
            .processes
            .iter()
            .map(|pr| ProcSt {
                pc: if pr.txns.is_empty() { Pc::Finished } else { Pc::Boundary(0) },
                regs: vec![0; pr.regs.len()],
                instances: vec![0; pr.txns.len()],
                pend: None,
            })
            .collect();
        EState { procs, log: vec![0; self.p.vars.len()], delayed: 0 }
    }

    fn issue(&self, s: &EState, q: usize) -> Vec<(Vec<Event>, EState)> {
        let Pc::Boundary(k) = s.procs[q].pc else { return Vec::new() };
        if s.procs[q].pend.is_some() {
            return Vec::new();
        }
        let ti = TxnInst { proc: q, txn: k, inst: s.procs[q].instances[k] };
        let nprocs = s.procs.len();
        let mut out = Vec::new();
        for o in run_body(self.p, &self.p.processes[q].txns[k], &s.procs[q].regs, &s.log) {
            let BodyEnd::AtCommit(label) = o.end else { continue };
            let ext = mask(&o.ext_read);
            let mut n = s.clone();
            for (r, ps) in n.procs.iter_mut().enumerate() {
                if r != q {
                    if let Some(t) = &mut ps.pend {
                        t.tok.srcr[q] = t.tok.fw & ext;
                    }
                }
            }
            let ps = &mut n.procs[q];
            ps.regs = o.regs.clone();
            ps.instances[k] += 1;
            ps.pend = Some(Pending {
                txn: k,
                inst: ti.inst,
                label,
                store: o.store.clone(),
                written: mask(&o.written),
                ext,
                age: vec![0; s.log.len()],
                dirty: 0,
                tok: Tokens::empty(nprocs),
            });
            let mut evs = vec![Event { kind: EventKind::Begin, txn: ti }];
            evs.extend(o.events.iter().map(|&kind| Event { kind, txn: ti }));
            out.push((evs, n));
        }
        out
    }

    /// Commits the pending transaction of `q`. The flag is set when the
    /// commit closes a cycle.
    fn commit(&self, s: &EState, q: usize) -> Vec<(Event, EState, bool)> {
        let Some(w) = &s.procs[q].pend else { return Vec::new() };
        if w.written & w.dirty != 0 {
            return Vec::new();
        }
        let nv = s.log.len();
        let mut nb = 0u64;
        for x in 0..nv {
            if w.written & (1 << x) != 0 && (!self.opts.value_aware || w.store[x] != s.log[x]) {
                nb |= 1 << x;
            }
        }
        let join = w.written & !nb;
        let cycle = w.tok.reaches(q, w, nb);
        let mut age0 = 0u64;
        let mut age1 = 0u64;
        for x in 0..nv {
            if w.ext & (1 << x) != 0 {
                match w.age[x] {
                    0 => age0 |= 1 << x,
                    1 => age1 |= 1 << x,
                    _ => {}
                }
            }
        }
        let mut n = s.clone();
        for (r, ps) in n.procs.iter_mut().enumerate() {
            if r == q {
                continue;
            }
            let Some(t) = &mut ps.pend else { continue };
            let mut aged = 0u64;
            for x in 0..nv {
                if t.age[x] >= 1 {
                    aged |= 1 << x;
                }
            }
            let target = w.written & t.ext & (nb | aged) != 0;
            let reached = target || t.tok.reaches(q, w, nb);
            let tk = &mut t.tok;
            if reached {
                tk.merge(&w.tok);
                tk.po |= 1 << q;
                tk.cbr |= age0;
                tk.pbr |= age1;
            }
            tk.pbw = (tk.pbw & !nb) | (tk.cbw & nb);
            tk.pbr = (tk.pbr & !nb) | (tk.cbr & nb);
            tk.cbr &= !nb;
            tk.cbw &= !nb;
            tk.fw &= !nb;
            if reached {
                tk.cbw |= nb | join;
                tk.fw |= nb;
            }
            tk.srcr[q] = 0;
            for x in 0..nv {
                if nb & t.ext & (1 << x) != 0 {
                    t.age[x] = (t.age[x] + 1).min(2);
                }
            }
            t.dirty |= w.written;
        }
        for x in 0..nv {
            if w.written & (1 << x) != 0 {
                n.log[x] = w.store[x];
            }
        }
        n.procs[q].pend = None;
        let ev = Event { kind: EventKind::Com, txn: TxnInst { proc: q, txn: w.txn, inst: w.inst } };
        commit_targets(self.p, q, w.txn, w.label)
            .into_iter()
            .map(|pc| {
                let mut m = n.clone();
                m.procs[q].pc = pc;
                (ev, m, cycle)
            })
            .collect()
    }

    fn steps(&self, s: &EState) -> Vec<Step> {
        let mut out = Vec::new();
        for q in 0..s.procs.len() {
            if s.procs[q].pend.is_some() {
                for (ev, next, cycle) in self.commit(s, q) {
                    out.push(Step { events: vec![ev], next, cycle });
                }
                continue;
            }
            let limited = self.opts.max_delayed;
            let can_delay = limited.is_none_or(|m| s.delayed < m);
            for (evs, mut next) in self.issue(s, q) {
                if limited.is_some() {
                    for (ev, m, cycle) in self.commit(&next, q) {
                        let mut e = evs.clone();
                        e.push(ev);
                        out.push(Step { events: e, next: m, cycle });
                    }
                    if can_delay {
                        next.delayed += 1;
                        out.push(Step { events: evs, next, cycle: false });
                    }
                } else {
                    out.push(Step { events: evs, next, cycle: false });
                }
            }
        }
        out
    }
}

/// Searches the macro-step state space of `p` for an SI execution whose
/// trace is not serializable.
pub fn check_robustness(p: &Program, opts: &EnumOptions) -> EnumResult {
    assert!(p.vars.len() <= 64 && p.processes.len() <= 64, "at most 64 variables and processes");
    let eng = Engine { p, opts: *opts };
    let s0 = eng.initial();
    let mut visited: HashSet<Vec<u8>> = HashSet::new();
    visited.insert(s0.key());
    let mut bound_hit = false;
    let mut path: Vec<Vec<Event>> = Vec::new();
    let mut stack: Vec<(Vec<Step>, usize)> = vec![(eng.steps(&s0), 0)];
    while let Some((steps, i)) = stack.last_mut() {
        if *i >= steps.len() {
            stack.pop();
            path.pop();
            continue;
        }
        let k = *i;
        *i += 1;
        let step = &steps[k];
        if step.cycle {
            let mut evs: Vec<Event> = path.iter().flatten().copied().collect();
            evs.extend(step.events.iter().copied());
            let evs = committed_projection(&evs);
            match trace_of(p, &evs, opts.value_aware) {
                Ok(trace) => match find_cycle(&trace) {
                    Some(cycle) => {
                        let states = visited.len();
                        return EnumResult {
                            robust: false,
                            bound_hit,
                            states,
                            witness: Some(Witness { events: evs, trace, cycle }),
                        };
                    }
                    None => log::error!("search reported a cycle the trace does not contain"),
                },
                Err(e) => log::error!("search produced an invalid execution: {e}"),
            }
            debug_assert!(false, "cycle detection disagrees with the trace");
        }
        if !visited.insert(step.next.key()) {
            continue;
        }
        let events = step.events.clone();
        let next = step.next.clone();
        if opts.bound.is_some_and(|b| path.len() + 1 >= b) {
            if !eng.steps(&next).is_empty() {
                bound_hit = true;
            }
            continue;
        }
        let succ = eng.steps(&next);
        path.push(events);
        stack.push((succ, 0));
    }
    EnumResult { robust: true, bound_hit, states: visited.len(), witness: None }
}

// ---------------------------------------------------------------------------
// Minimal anomalies

/// A non-serializable execution `alpha . isu(t) . beta . com(t)` where `t` is
/// the only transaction with others running between its issue and commit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinimalAnomaly {
    pub events: Vec<Event>,
    pub trace: Trace,
    pub delayed: TxnInst,
    pub alpha: Vec<TxnInst>,
    pub beta: Vec<TxnInst>,
    /// `rw(x)` from the issue of `delayed` into `a`.
    pub a: TxnInst,
    pub x: VarId,
    /// `rw(y)` from `b` into the commit of `delayed`.
    pub b: TxnInst,
    pub y: VarId,
}

/// Finds an anomaly with a single delayed transaction, trimmed so that
/// every transaction after the delayed one's issue lies on a happens-before
/// path from its issue to its commit. Uses standard (value-blind) traces.
pub fn find_minimal_anomaly(p: &Program, bound: Option<usize>) -> Option<MinimalAnomaly> {
    let r = check_robustness(p, &EnumOptions { value_aware: false, bound, max_delayed: Some(1) });
    let w = r.witness?;
    let evs = w.events;
    // The delayed transaction is the one whose begin and commit are not
    // adjacent in the summary.
    let tr = &w.trace;
    let t = tr
        .txns
        .iter()
        .copied()
        .find(|&u| tr.com_of(u).unwrap() != tr.isu_of(u).unwrap() + 1)
        .expect("a non-serializable trace has a delayed transaction");
    let tb = evs.iter().position(|e| e.txn == t && e.kind == EventKind::Begin).unwrap();
    let alpha: Vec<TxnInst> = order_of(&evs[..tb]);
    let beta_all: Vec<TxnInst> = order_of(&evs[tb..]).into_iter().filter(|&u| u != t).collect();

    let g = tr.txn_graph();
    let ti = tr.txn_index(t).unwrap();
    let fwd = reach_set(&g, ti);
    let rev: Vec<BTreeSet<usize>> = {
        let mut r = vec![BTreeSet::new(); g.len()];
        for (a, s) in g.iter().enumerate() {
            for &b in s {
                r[b].insert(a);
            }
        }
        r
    };
    let bwd = reach_set(&rev, ti);
    let ix = |u: TxnInst| tr.txn_index(u).unwrap();
    let moved: Vec<TxnInst> = beta_all.iter().copied().filter(|&u| !fwd.contains(&ix(u))).collect();
    let kept: Vec<TxnInst> = beta_all.iter().copied().filter(|&u| fwd.contains(&ix(u)) && bwd.contains(&ix(u))).collect();

    let mut out: Vec<Event> = evs[..tb].to_vec();
    for u in &moved {
        out.extend(evs.iter().filter(|e| e.txn == *u));
    }
    out.extend(evs.iter().filter(|e| e.txn == t && e.kind != EventKind::Com));
    for u in &kept {
        out.extend(evs.iter().filter(|e| e.txn == *u));
    }
    out.push(Event { kind: EventKind::Com, txn: t });
    if replay_all(p, &out, Mode::Si).is_err() {
        log::error!("trimmed anomaly does not replay; keeping the untrimmed one");
        out = evs.clone();
    }
    let trace = trace_of(p, &out, false).ok()?;
    let mut alpha2 = alpha;
    alpha2.extend(moved);
    let beta = order_of(&out).into_iter().filter(|u| !alpha2.contains(u) && *u != t).collect::<Vec<_>>();
    let (a, x, b, y) = rw_pair(&trace, t)?;
    Some(MinimalAnomaly { events: out, trace, delayed: t, alpha: alpha2, beta, a, x, b, y })
}

fn order_of(evs: &[Event]) -> Vec<TxnInst> {
    let mut v = Vec::new();
    for e in evs {
        if e.kind == EventKind::Begin {
            v.push(e.txn);
        }
    }
    v
}

fn reach_set(g: &[BTreeSet<usize>], s: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut st: Vec<usize> = g[s].iter().copied().collect();
    while let Some(v) = st.pop() {
        if seen.insert(v) {
            st.extend(g[v].iter().copied());
        }
    }
    seen
}

/// `rw(x)` from `isu(t)` to some `a` and `rw(y)` from some `b` to `com(t)`
/// with `x != y`, where `a` and `b` are issued after `t`.
fn rw_pair(tr: &Trace, t: TxnInst) -> Option<(TxnInst, VarId, TxnInst, VarId)> {
    let it = tr.isu_of(t)?;
    let ct = tr.com_of(t)?;
    let outs: Vec<(TxnInst, VarId)> = tr
        .edges
        .iter()
        .filter(|e| e.rel == Rel::Rw && e.from == it)
        .map(|e| (tr.events[e.to].txn, e.var.unwrap()))
        .collect();
    let ins: Vec<(TxnInst, VarId)> = tr
        .edges
        .iter()
        .filter(|e| e.rel == Rel::Rw && e.to == ct && e.from > it)
        .map(|e| (tr.events[e.from].txn, e.var.unwrap()))
        .collect();
    for &(a, x) in &outs {
        for &(b, y) in &ins {
            if x != y {
                return Some((a, x, b, y));
            }
        }
    }
    None
}

/// Outcome of checking the five shape conditions of a minimal anomaly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalyConditions {
    /// The delayed transaction is the only delayed one.
    pub a: bool,
    /// Its issue happens before its commit through the events in between.
    pub b: bool,
    /// Every transaction in between is happens-after the issue and
    /// happens-before the commit.
    pub c: bool,
    /// An `rw` edge leaves the issue and another enters the commit, on
    /// different variables.
    pub d: bool,
    /// No transaction in between writes a variable the delayed one writes.
    pub e: bool,
}

impl AnomalyConditions {
    pub fn all(&self) -> bool {
        self.a && self.b && self.c && self.d && self.e
    }
}

/// Checks the shape conditions on an execution ending with the commit of
/// `delayed`, recomputing everything from the events. Transactions whose
/// issue and commit are adjacent are treated as single atomic nodes.
pub fn check_anomaly_conditions(p: &Program, events: &[Event], delayed: TxnInst) -> AnomalyConditions {
    let no = AnomalyConditions { a: false, b: false, c: false, d: false, e: false };
    let Ok(tr) = trace_of(p, events, false) else { return no };
    let (Some(it), Some(ct)) = (tr.isu_of(delayed), tr.com_of(delayed)) else { return no };
    if ct + 1 != tr.events.len() || is_serializable(&tr) {
        return no;
    }
    // Merge atomic transactions into one node.
    let mut node = vec![0usize; tr.events.len()];
    let mut k = 0;
    for i in 0..tr.events.len() {
        let e = tr.events[i];
        let merged = e.com && i > 0 && tr.events[i - 1].txn == e.txn && !tr.events[i - 1].com;
        if merged {
            node[i] = node[i - 1];
        } else {
            node[i] = k;
            k += 1;
        }
    }
    let mut adj = vec![BTreeSet::new(); k];
    for e in &tr.edges {
        if node[e.from] != node[e.to] {
            adj[node[e.from]].insert(node[e.to]);
        }
    }
    let through = |a: usize, b: usize, lo: usize, hi: usize| -> bool {
        // Non-empty chain from node a to node b through nodes in (lo, hi).
        let mut seen = BTreeSet::new();
        let mut st: Vec<usize> = adj[a].iter().copied().filter(|&c| c > lo && c < hi).collect();
        while let Some(c) = st.pop() {
            if !seen.insert(c) {
                continue;
            }
            if adj[c].contains(&b) {
                return true;
            }
            st.extend(adj[c].iter().copied().filter(|&d| d > lo && d < hi));
        }
        false
    };
    let (ni, nc) = (node[it], node[ct]);
    let cond_b = through(ni, nc, ni, nc);
    let mut cond_a = cond_b;
    for &u in &tr.txns {
        if u == delayed {
            continue;
        }
        let (i, c) = (node[tr.isu_of(u).unwrap()], node[tr.com_of(u).unwrap()]);
        if i != c && through(i, c, i, c) {
            cond_a = false;
        }
    }
    let fwd = reach_set(&adj, ni);
    let rev: Vec<BTreeSet<usize>> = {
        let mut r = vec![BTreeSet::new(); k];
        for (a, s) in adj.iter().enumerate() {
            for &b in s {
                r[b].insert(a);
            }
        }
        r
    };
    let bwd = reach_set(&rev, nc);
    let beta: Vec<TxnInst> = tr.txns.iter().copied().filter(|&u| u != delayed && tr.isu_of(u).unwrap() > it).collect();
    let cond_c = beta.iter().all(|&u| {
        let (i, c) = (node[tr.isu_of(u).unwrap()], node[tr.com_of(u).unwrap()]);
        fwd.contains(&i) && fwd.contains(&c) && bwd.contains(&i) && bwd.contains(&c)
    });
    let cond_d = rw_pair(&tr, delayed).is_some_and(|(a, _, b, _)| beta.contains(&a) && beta.contains(&b));
    let tw: BTreeSet<VarId> = tr.writes[tr.txn_index(delayed).unwrap()].keys().copied().collect();
    let cond_e = beta.iter().all(|&u| tr.writes[tr.txn_index(u).unwrap()].keys().all(|x| !tw.contains(x)));
    AnomalyConditions { a: cond_a, b: cond_b, c: cond_c, d: cond_d, e: cond_e }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_program;
    use crate::semantics::events_from_text;

    fn ws() -> Program {
        parse_program(include_str!("../corpus/ws.txn")).unwrap()
    }

    const WS_SKEW: &str = "begin p1 t1[0]\nbegin p2 t2[0]\nload p1 t1[0] y 0\nisu p1 t1[0] x 1\n\
                           load p2 t2[0] x 0\nisu p2 t2[0] y 1\ncom p1 t1[0]\ncom p2 t2[0]\n";

    #[test]
    fn write_skew_trace_has_rw_cycle() {
        let p = ws();
        let evs = events_from_text(&p, WS_SKEW).unwrap();
        let t = trace_of(&p, &evs, false).unwrap();
        let rw = t.relation(Rel::Rw);
        assert_eq!(rw.len(), 2);
        assert!(!is_serializable(&t));
        let c = find_cycle(&t).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].proc, 0);
    }

    #[test]
    fn serial_trace_is_serializable() {
        let p = ws();
        let evs = events_from_text(
            &p,
            "begin p1 t1[0]\nload p1 t1[0] y 0\nisu p1 t1[0] x 1\ncom p1 t1[0]\n\
             begin p2 t2[0]\nload p2 t2[0] x 1\nisu p2 t2[0] y 1\ncom p2 t2[0]\n",
        )
        .unwrap();
        let t = trace_of(&p, &evs, false).unwrap();
        assert!(is_serializable(&t));
        assert_eq!(t.relation(Rel::Rf).len(), 1);
        assert_eq!(t.relation(Rel::Rw).len(), 1);
    }

    #[test]
    fn uncommitted_transactions_are_dropped() {
        let p = ws();
        let evs = events_from_text(&p, "begin p1 t1[0]\nload p1 t1[0] y 0\n").unwrap();
        let t = trace_of(&p, &evs, false).unwrap();
        assert!(t.events.is_empty());
    }

    #[test]
    fn inconsistent_load_is_rejected() {
        let p = ws();
        let evs = events_from_text(&p, "begin p1 t1[0]\nload p1 t1[0] y 1\ncom p1 t1[0]\n").unwrap();
        assert!(trace_of(&p, &evs, false).is_err());
    }

    #[test]
    fn ws_is_not_robust() {
        let r = check_robustness_enumerative(&ws(), false, None);
        assert!(!r.robust);
        let w = r.witness.unwrap();
        assert_eq!(w.cycle.len(), 2);
    }

    #[test]
    fn ws_minimal_anomaly_delays_t1() {
        let p = ws();
        let m = find_minimal_anomaly(&p, None).unwrap();
        assert_eq!(m.delayed.proc, 0);
        assert_eq!(m.beta.len(), 1);
        assert_eq!(m.a, m.b);
        assert!(check_anomaly_conditions(&p, &m.events, m.delayed).all());
    }
}
