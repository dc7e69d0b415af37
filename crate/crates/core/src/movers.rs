//! Mover analysis and the commutativity dependency graph (CDG).
//!
//! Nodes are the transactions of a program together with two weakened copies
//! of each: the read-free variant `t\{r}`, whose shared reads return
//! arbitrary values, and the write-free variant `t\{w}`, whose shared writes
//! are dropped. An M-edge `(a, b)` records that `a` does not move right past
//! `b` in some serial execution, labeled by the dependencies between them.
//!
//! Movers are decided per state: the serial state space of the program, in
//! which any variant may stand in for its transaction, is explored
//! exhaustively, and at every state where `a` and `b` can run back to back
//! from different processes both orders are executed and their end states
//! compared. Since the state space is finite this is exact for that
//! quantification, and the graph is an over-approximation of the mover
//! relations over executions of the original program.
//!
//! A non-mover cycle through `t0` is a path `t0\{w} -RW-> t1 -> ... -> tn
//! -RW-> t0\{r}` over original transactions that write none of the
//! variables `t0` writes. Its absence proves robustness.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{Expr, InstrKind, Program, Target, Transaction, TxnRef, Value, VarId};
use crate::semantics::{atomic_successors_with, initial_state, run_body, BodyEnd, EventKind, MachineState, Pc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VariantKind {
    Original,
    /// `t\{r}`: every shared read becomes `reg := *`.
    ReadFree,
    /// `t\{w}`: every shared write is disabled.
    WriteFree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TxnVariant {
    pub base: TxnRef,
    pub kind: VariantKind,
}

impl TxnVariant {
    pub fn original(base: TxnRef) -> TxnVariant {
        TxnVariant { base, kind: VariantKind::Original }
    }

    pub fn name(&self, p: &Program) -> String {
        let tid = p.tid(self.base);
        match self.kind {
            VariantKind::Original => tid.to_string(),
            VariantKind::ReadFree => format!("{tid}\\{{r}}"),
            VariantKind::WriteFree => format!("{tid}\\{{w}}"),
        }
    }
}

/// Rewrites `t` into the given variant. Labels and control flow are kept.
pub fn derive_variant(t: &Transaction, kind: VariantKind) -> Transaction {
    let mut out = t.clone();
    for i in &mut out.instrs {
        match (kind, &i.kind) {
            (VariantKind::ReadFree, InstrKind::Read { reg, .. }) => {
                i.kind = InstrKind::Assign { reg: *reg, expr: Expr::Nondet };
            }
            (VariantKind::WriteFree, InstrKind::Write { .. }) => {
                i.kind = InstrKind::Assume(Expr::Bool(true));
            }
            _ => {}
        }
    }
    out
}

/// Dependency class between two adjacent transactions `a; b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dep {
    /// `a` writes a variable `b` reads.
    Wr,
    /// Both write a common variable.
    Ww,
    /// `a` reads a variable `b` writes.
    Rw,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CommuteOutcome {
    Commutes,
    /// Some end state of `a; b` is not an end state of `b; a`.
    Conflicts(BTreeSet<Dep>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MoverError {
    #[error("{0} cannot run next in its process, or both transactions belong to one process")]
    NotEnabled(String),
}

/// Variant bodies indexed by transaction and kind.
struct Variants {
    bodies: HashMap<TxnVariant, Transaction>,
}

impl Variants {
    fn new(p: &Program) -> Variants {
        let mut bodies = HashMap::new();
        for r in p.txn_refs() {
            for kind in [VariantKind::Original, VariantKind::ReadFree, VariantKind::WriteFree] {
                bodies.insert(TxnVariant { base: r, kind }, derive_variant(p.txn(r), kind));
            }
        }
        Variants { bodies }
    }

    fn get(&self, v: TxnVariant) -> &Transaction {
        &self.bodies[&v]
    }
}

/// Shared variables a variant reads from and writes to when started in `s`.
fn accesses(p: &Program, s: &MachineState, q: usize, t: &Transaction) -> (BTreeSet<VarId>, BTreeSet<VarId>) {
    let mut r = BTreeSet::new();
    let mut w = BTreeSet::new();
    for o in run_body(p, t, &s.ls[q].regs, &s.log) {
        for x in 0..o.written.len() {
            if o.ext_read[x] {
                r.insert(x);
            }
            // Writes on a path to the error location are never published.
            if o.written[x] && o.end != BodyEnd::Error {
                w.insert(x);
            }
        }
    }
    (r, w)
}

/// Successor states of running `t` atomically, each paired with the values
/// its shared reads returned.
fn run(p: &Program, s: &MachineState, q: usize, t: &Transaction) -> Vec<(Vec<Value>, MachineState)> {
    atomic_successors_with(p, s, q, t)
        .into_iter()
        .map(|(evs, n)| {
            let loads = evs
                .iter()
                .filter_map(|e| match e.kind {
                    EventKind::Load { value, .. } => Some(value),
                    _ => None,
                })
                .collect();
            (loads, n)
        })
        .collect()
}

fn deps(ra: &BTreeSet<VarId>, wa: &BTreeSet<VarId>, rb: &BTreeSet<VarId>, wb: &BTreeSet<VarId>) -> BTreeSet<Dep> {
    let mut d = BTreeSet::new();
    if !wa.is_disjoint(rb) {
        d.insert(Dep::Wr);
    }
    if !wa.is_disjoint(wb) {
        d.insert(Dep::Ww);
    }
    if !ra.is_disjoint(wb) {
        d.insert(Dep::Rw);
    }
    d
}

fn commute_with(p: &Program, vs: &Variants, s: &MachineState, a: TxnVariant, b: TxnVariant) -> CommuteOutcome {
    let (qa, qb) = (a.base.proc, b.base.proc);
    let (ta, tb) = (vs.get(a), vs.get(b));
    let mut ra = BTreeSet::new();
    let mut wa = BTreeSet::new();
    let mut rb = BTreeSet::new();
    let mut wb = BTreeSet::new();
    let note = |s: &MachineState, q: usize, t: &Transaction, r: &mut BTreeSet<VarId>, w: &mut BTreeSet<VarId>| {
        let (r2, w2) = accesses(p, s, q, t);
        r.extend(r2);
        w.extend(w2);
    };
    // End states are compared together with what each side read, so that a
    // read whose value is dead at the end still counts as a dependency.
    let mut ab = Vec::new();
    note(s, qa, ta, &mut ra, &mut wa);
    for (la, sa) in run(p, s, qa, ta) {
        note(&sa, qb, tb, &mut rb, &mut wb);
        ab.extend(run(p, &sa, qb, tb).into_iter().map(|(lb, n)| (n.key(), la.clone(), lb)));
    }
    if ab.is_empty() {
        return CommuteOutcome::Commutes;
    }
    let mut ba = HashSet::new();
    note(s, qb, tb, &mut rb, &mut wb);
    for (lb, sb) in run(p, s, qb, tb) {
        note(&sb, qa, ta, &mut ra, &mut wa);
        ba.extend(run(p, &sb, qa, ta).into_iter().map(|(la, n)| (n.key(), la, lb.clone())));
    }
    if ab.iter().all(|k| ba.contains(k)) {
        CommuteOutcome::Commutes
    } else {
        CommuteOutcome::Conflicts(deps(&ra, &wa, &rb, &wb))
    }
}

/// Whether `a` moves right past `b` from state `s`: every end state of
/// running `a` then `b` atomically must also be an end state of `b` then
/// `a`. States are compared on program counters, registers, the shared
/// store, and the values returned by the shared reads of `a` and `b`. When `a; b` cannot run at all from `s` the pair trivially commutes
/// here.
pub fn commutes_after(p: &Program, s: &MachineState, a: TxnVariant, b: TxnVariant) -> Result<CommuteOutcome, MoverError> {
    for v in [a, b] {
        if s.ls[v.base.proc].pc != Pc::Boundary(v.base.txn) {
            return Err(MoverError::NotEnabled(v.name(p)));
        }
    }
    if a.base.proc == b.base.proc {
        return Err(MoverError::NotEnabled(b.name(p)));
    }
    let vs = Variants::new(p);
    Ok(commute_with(p, &vs, s, a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeLabel {
    Po,
    Mwr,
    Mww,
    Mrw,
}

impl From<Dep> for EdgeLabel {
    fn from(d: Dep) -> EdgeLabel {
        match d {
            Dep::Wr => EdgeLabel::Mwr,
            Dep::Ww => EdgeLabel::Mww,
            Dep::Rw => EdgeLabel::Mrw,
        }
    }
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeLabel::Po => "po",
            EdgeLabel::Mwr => "wr",
            EdgeLabel::Mww => "ww",
            EdgeLabel::Mrw => "rw",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cdg {
    /// Originals first, then read-free, then write-free variants, each in
    /// program order.
    pub nodes: Vec<TxnVariant>,
    pub edges: BTreeSet<(usize, usize, EdgeLabel)>,
    /// Serial states of the variant-extended program that were examined.
    pub states: usize,
    /// Exploration stopped at the state bound; the graph may miss edges.
    pub truncated: bool,
}

impl Cdg {
    pub fn node(&self, v: TxnVariant) -> Option<usize> {
        self.nodes.iter().position(|n| *n == v)
    }

    pub fn labels(&self, a: TxnVariant, b: TxnVariant) -> BTreeSet<EdgeLabel> {
        let (Some(i), Some(j)) = (self.node(a), self.node(b)) else { return BTreeSet::new() };
        self.edges.iter().filter(|e| e.0 == i && e.1 == j).map(|e| e.2).collect()
    }

    pub fn has(&self, a: TxnVariant, b: TxnVariant, l: EdgeLabel) -> bool {
        self.labels(a, b).contains(&l)
    }

    /// M-edges as `(from, to)` variant pairs with their labels.
    pub fn m_edges(&self) -> BTreeMap<(TxnVariant, TxnVariant), BTreeSet<EdgeLabel>> {
        let mut out: BTreeMap<_, BTreeSet<_>> = BTreeMap::new();
        for &(i, j, l) in &self.edges {
            if l != EdgeLabel::Po {
                out.entry((self.nodes[i], self.nodes[j])).or_default().insert(l);
            }
        }
        out
    }
}

fn syntactic_deps(vs: &Variants, a: TxnVariant, b: TxnVariant) -> BTreeSet<Dep> {
    let (ta, tb) = (vs.get(a), vs.get(b));
    deps(&ta.read_set(), &ta.write_set(), &tb.read_set(), &tb.write_set())
}

/// Transactions reachable from `from` along commit successors, transitively.
fn po_successors(p: &Program, from: TxnRef) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<usize> = p.successors_of(from).into_iter().collect();
    while let Some(k) = stack.pop() {
        if seen.insert(k) {
            stack.extend(p.successors_of(TxnRef { proc: from.proc, txn: k }));
        }
    }
    seen
}

/// Builds the commutativity dependency graph by exhaustive exploration of
/// the serial state space in which any variant may run in place of its
/// transaction. `bound` caps the number of states examined.
pub fn compute_nonmover_relations(p: &Program, bound: Option<usize>) -> Cdg {
    let vs = Variants::new(p);
    let refs = p.txn_refs();
    let mut nodes = Vec::new();
    for kind in [VariantKind::Original, VariantKind::ReadFree, VariantKind::WriteFree] {
        nodes.extend(refs.iter().map(|&base| TxnVariant { base, kind }));
    }
    let index: HashMap<TxnVariant, usize> = nodes.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let mut edges = BTreeSet::new();
    for &r in &refs {
        for k in po_successors(p, r) {
            let to = TxnRef { proc: r.proc, txn: k };
            if to != r {
                edges.insert((index[&TxnVariant::original(r)], index[&TxnVariant::original(to)], EdgeLabel::Po));
            }
        }
    }

    // Pairs whose edge already carries every label it could syntactically
    // get need no further checks.
    let mut found: HashMap<(TxnVariant, TxnVariant), BTreeSet<Dep>> = HashMap::new();
    let kinds = [VariantKind::Original, VariantKind::ReadFree, VariantKind::WriteFree];
    let s0 = initial_state(p);
    let mut seen = HashSet::new();
    seen.insert(s0.key());
    let mut queue = VecDeque::from([s0]);
    let mut truncated = false;
    let mut states = 0;
    while let Some(s) = queue.pop_front() {
        if bound.is_some_and(|b| states >= b) {
            truncated = true;
            break;
        }
        states += 1;
        let ready: Vec<(usize, usize)> = s
            .ls
            .iter()
            .enumerate()
            .filter_map(|(q, l)| match l.pc {
                Pc::Boundary(k) => Some((q, k)),
                _ => None,
            })
            .collect();
        for &(qa, ka) in &ready {
            for &(qb, kb) in &ready {
                if qa == qb {
                    continue;
                }
                for &ka_kind in &kinds {
                    for &kb_kind in &kinds {
                        let a = TxnVariant { base: TxnRef { proc: qa, txn: ka }, kind: ka_kind };
                        let b = TxnVariant { base: TxnRef { proc: qb, txn: kb }, kind: kb_kind };
                        let max = syntactic_deps(&vs, a, b);
                        if max.is_empty() || found.get(&(a, b)).is_some_and(|d| *d == max) {
                            continue;
                        }
                        if let CommuteOutcome::Conflicts(d) = commute_with(p, &vs, &s, a, b) {
                            found.entry((a, b)).or_default().extend(d);
                        }
                    }
                }
            }
        }
        for &(q, k) in &ready {
            for kind in kinds {
                let t = vs.get(TxnVariant { base: TxnRef { proc: q, txn: k }, kind });
                for (_, n) in run(p, &s, q, t) {
                    if seen.insert(n.key()) {
                        queue.push_back(n);
                    }
                }
            }
        }
    }
    for ((a, b), ds) in found {
        for d in ds {
            edges.insert((index[&a], index[&b], d.into()));
        }
    }
    log::debug!("cdg: {} states, {} edges, truncated={truncated}", states, edges.len());
    Cdg { nodes, edges, states, truncated }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NonMoverCycle {
    /// The transaction `t0` whose write-free and read-free variants close
    /// the cycle.
    pub pivot: TxnRef,
    /// `t1 .. tn`, original transactions.
    pub path: Vec<TxnRef>,
    /// Labels of the edges along `t0\{w}, t1, ..., tn, t0\{r}`.
    pub labels: Vec<BTreeSet<EdgeLabel>>,
}

impl NonMoverCycle {
    pub fn describe(&self, p: &Program) -> String {
        let mut s = format!("{}\\{{w}}", p.tid(self.pivot));
        let names = self.path.iter().map(|r| p.tid(*r).to_string()).chain([format!("{}\\{{r}}", p.tid(self.pivot))]);
        for (n, ls) in names.zip(&self.labels) {
            let l: Vec<String> = ls.iter().map(|l| l.to_string()).collect();
            let _ = write!(s, " -{}-> {n}", l.join(","));
        }
        s
    }
}

/// Looks for a non-mover cycle, trying pivots in program order and
/// returning a shortest path for the first pivot that has one.
pub fn find_non_mover_cycle(g: &Cdg, p: &Program) -> Option<NonMoverCycle> {
    let orig: Vec<TxnRef> = p.txn_refs();
    for &t0 in &orig {
        let w0 = p.txn(t0).write_set();
        let ok = |t: TxnRef| p.txn(t).write_set().is_disjoint(&w0);
        let wf = TxnVariant { base: t0, kind: VariantKind::WriteFree };
        let rf = TxnVariant { base: t0, kind: VariantKind::ReadFree };
        let starts: Vec<TxnRef> =
            orig.iter().copied().filter(|&t| ok(t) && g.has(wf, TxnVariant::original(t), EdgeLabel::Mrw)).collect();
        let is_end = |t: TxnRef| g.has(TxnVariant::original(t), rf, EdgeLabel::Mrw);
        let mut parent: BTreeMap<TxnRef, Option<TxnRef>> = BTreeMap::new();
        let mut queue = VecDeque::new();
        for &t in &starts {
            parent.insert(t, None);
            queue.push_back(t);
        }
        while let Some(t) = queue.pop_front() {
            if is_end(t) {
                let mut path = vec![t];
                let mut cur = t;
                while let Some(Some(prev)) = parent.get(&cur) {
                    path.push(*prev);
                    cur = *prev;
                }
                path.reverse();
                let mut labels = vec![g.labels(wf, TxnVariant::original(path[0]))];
                for w in path.windows(2) {
                    labels.push(g.labels(TxnVariant::original(w[0]), TxnVariant::original(w[1])));
                }
                labels.push(g.labels(TxnVariant::original(t), rf));
                return Some(NonMoverCycle { pivot: t0, path, labels });
            }
            for &u in &orig {
                if ok(u) && !parent.contains_key(&u) && !g.labels(TxnVariant::original(t), TxnVariant::original(u)).is_empty() {
                    parent.insert(u, Some(t));
                    queue.push_back(u);
                }
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProofVerdict {
    Proved,
    /// No proof. Carries the non-mover cycle that blocked it, if any; a
    /// cycle does not imply a robustness violation.
    Unknown { cycle: Option<NonMoverCycle>, truncated: bool },
}

impl ProofVerdict {
    pub fn is_proved(&self) -> bool {
        *self == ProofVerdict::Proved
    }
}

#[derive(Debug, Clone)]
pub struct CdgResult {
    pub verdict: ProofVerdict,
    pub graph: Cdg,
}

/// Proves robustness when the graph has no non-mover cycle and its
/// construction was not truncated.
pub fn check_robustness_cdg(p: &Program, bound: Option<usize>) -> CdgResult {
    let graph = compute_nonmover_relations(p, bound);
    let cycle = find_non_mover_cycle(&graph, p);
    let verdict = if cycle.is_none() && !graph.truncated {
        ProofVerdict::Proved
    } else {
        ProofVerdict::Unknown { cycle, truncated: graph.truncated }
    };
    CdgResult { verdict, graph }
}

pub fn cdg_to_dot(p: &Program, g: &Cdg) -> String {
    let mut s = format!("digraph \"cdg_{}\" {{\n", p.name);
    for (i, n) in g.nodes.iter().enumerate() {
        let _ = writeln!(s, "  n{i} [label=\"{}\"];", n.name(p).replace('\\', "\\\\"));
    }
    let mut grouped: BTreeMap<(usize, usize), Vec<String>> = BTreeMap::new();
    for &(i, j, l) in &g.edges {
        grouped.entry((i, j)).or_default().push(l.to_string());
    }
    for ((i, j), ls) in grouped {
        let style = if ls == ["po"] { " style=dashed" } else { "" };
        let _ = writeln!(s, "  n{i} -> n{j} [label=\"{}\"{style}];", ls.join(","));
    }
    s.push_str("}\n");
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CdgJson {
    pub nodes: Vec<String>,
    pub edges: Vec<CdgEdgeJson>,
    pub states: usize,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CdgEdgeJson {
    pub from: String,
    pub to: String,
    pub label: EdgeLabel,
}

pub fn cdg_to_json(p: &Program, g: &Cdg) -> CdgJson {
    CdgJson {
        nodes: g.nodes.iter().map(|n| n.name(p)).collect(),
        edges: g
            .edges
            .iter()
            .map(|&(i, j, label)| CdgEdgeJson { from: g.nodes[i].name(p), to: g.nodes[j].name(p), label })
            .collect(),
        states: g.states,
        truncated: g.truncated,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RobustReason {
    /// Every transaction performs at most one shared access.
    SingleAccess,
    /// Every transaction accesses at most one shared variable.
    SingleVariable,
    /// Every path of every transaction to its commit writes this variable.
    CommonWrite(VarId),
}

/// Whether every path from the entry of `t` to a commit passes a write to `x`.
fn always_writes(t: &Transaction, x: VarId) -> bool {
    let mut seen = BTreeSet::new();
    let mut stack = vec![t.entry];
    while let Some(l) = stack.pop() {
        if !seen.insert(l) {
            continue;
        }
        for i in t.at(l) {
            match i.kind {
                InstrKind::Commit => return false,
                InstrKind::Write { var, .. } if var == x => continue,
                _ => {}
            }
            for tg in &i.targets {
                if let Target::Label(n) = tg {
                    stack.push(*n);
                }
            }
        }
    }
    true
}

/// Cheap sufficient conditions for robustness that only look at the
/// program text.
pub fn syntactic_robustness_check(p: &Program) -> Option<RobustReason> {
    let txns: Vec<&Transaction> = p.processes.iter().flat_map(|pr| &pr.txns).collect();
    if txns.iter().all(|t| t.access_count() <= 1) {
        return Some(RobustReason::SingleAccess);
    }
    if txns.iter().all(|t| t.read_set().union(&t.write_set()).count() <= 1) {
        return Some(RobustReason::SingleVariable);
    }
    (0..p.vars.len()).find(|&x| txns.iter().all(|t| always_writes(t, x))).map(RobustReason::CommonWrite)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_program;

    fn v(p: &Program, tid: &str, kind: VariantKind) -> TxnVariant {
        TxnVariant { base: p.find_txn(tid).unwrap(), kind }
    }

    #[test]
    fn ws_conflicts_both_ways() {
        let p = parse_program(include_str!("../corpus/ws.txn")).unwrap();
        let s = initial_state(&p);
        let (t1, t2) = (v(&p, "t1", VariantKind::Original), v(&p, "t2", VariantKind::Original));
        let out = commutes_after(&p, &s, t1, t2).unwrap();
        assert_eq!(out, CommuteOutcome::Conflicts([Dep::Wr, Dep::Rw].into()));
        assert!(commutes_after(&p, &s, t1, t1).is_err());
        assert!(find_non_mover_cycle(&compute_nonmover_relations(&p, None), &p).is_some());
    }

    #[test]
    fn ws_variant_is_proved() {
        let p = parse_program(include_str!("../corpus/ws_variant.txn")).unwrap();
        let r = check_robustness_cdg(&p, None);
        assert_eq!(r.verdict, ProofVerdict::Proved);
    }

    #[test]
    fn ws_variant_graph_has_the_expected_m_edges() {
        let p = parse_program(include_str!("../corpus/ws_variant.txn")).unwrap();
        let g = compute_nonmover_relations(&p, None);
        let got: BTreeSet<(String, String)> = g.m_edges().keys().map(|(a, b)| (a.name(&p), b.name(&p))).collect();
        let want: BTreeSet<(String, String)> = [
            ("t1\\{r}", "t2"),
            ("t1\\{r}", "t2\\{w}"),
            ("t1", "t2"),
            ("t1", "t2\\{w}"),
            ("t2", "t1\\{r}"),
            ("t2", "t1"),
            ("t2\\{w}", "t1\\{r}"),
            ("t2\\{w}", "t1"),
        ]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn guarded_swap_is_proved() {
        let p = parse_program(include_str!("../corpus/guarded_swap.txn")).unwrap();
        assert!(check_robustness_cdg(&p, None).verdict.is_proved());
    }

    #[test]
    fn syntactic_clauses() {
        let p = parse_program(include_str!("../corpus/ws.txn")).unwrap();
        assert_eq!(syntactic_robustness_check(&p), None);
    }
}
