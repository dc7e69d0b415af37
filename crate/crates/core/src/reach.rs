//! Explicit-state reachability.
//!
//! Under SER a transaction runs without interference, so the search steps
//! over whole transactions and only visits states where no transaction is
//! active. Under SI it steps over single events. States are deduplicated by
//! [`MachineState::key`].

use std::collections::{HashMap, VecDeque};

use crate::ir::Program;
use crate::semantics::{atomic_successors, enabled_si, initial_state, Event, MachineState, Mode, StatePred};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReachTarget {
    /// Some process is at the error location.
    Error,
    /// The predicate holds; with `at_end`, only in states where every
    /// process has finished or stopped at the error location.
    Pred { pred: StatePred, at_end: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Search {
    #[default]
    Dfs,
    Bfs,
}

#[derive(Debug, Clone)]
pub struct ReachQuery<'a> {
    pub program: &'a Program,
    pub target: ReachTarget,
    /// Maximum number of steps (transactions under SER, events under SI).
    pub bound: Option<usize>,
    pub mode: Mode,
    pub search: Search,
}

impl<'a> ReachQuery<'a> {
    pub fn new(program: &'a Program, target: ReachTarget) -> ReachQuery<'a> {
        ReachQuery { program, target, bound: None, mode: Mode::Ser, search: Search::Dfs }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachResult {
    pub reachable: bool,
    /// Events leading to the first target state found.
    pub path: Option<Vec<Event>>,
    pub final_state: Option<MachineState>,
    pub states_explored: usize,
    pub bound_hit: bool,
}

fn successors(p: &Program, s: &MachineState, mode: Mode) -> Vec<(Vec<Event>, MachineState)> {
    match mode {
        Mode::Ser => (0..s.ls.len()).flat_map(|q| atomic_successors(p, s, q)).collect(),
        Mode::Si => enabled_si(p, s).into_iter().map(|(e, n)| (vec![e], n)).collect(),
    }
}

fn hits(t: &ReachTarget, s: &MachineState) -> bool {
    match t {
        ReachTarget::Error => s.at_error(),
        ReachTarget::Pred { pred, at_end } => (!at_end || s.all_done()) && pred.eval(s),
    }
}

struct Node {
    parent: usize,
    events: Vec<Event>,
    depth: usize,
}

pub fn reach(q: &ReachQuery) -> ReachResult {
    let p = q.program;
    let s0 = initial_state(p);
    let mut nodes = vec![Node { parent: usize::MAX, events: Vec::new(), depth: 0 }];
    let mut seen: HashMap<Vec<u8>, usize> = HashMap::new();
    seen.insert(s0.key(), 0);
    let mut frontier: VecDeque<(usize, MachineState)> = VecDeque::new();
    frontier.push_back((0, s0));
    let mut bound_hit = false;
    while let Some((id, s)) = match q.search {
        Search::Dfs => frontier.pop_back(),
        Search::Bfs => frontier.pop_front(),
    } {
        if hits(&q.target, &s) {
            let mut path = Vec::new();
            let mut cur = id;
            while cur != 0 {
                path.push(nodes[cur].events.clone());
                cur = nodes[cur].parent;
            }
            path.reverse();
            return ReachResult {
                reachable: true,
                path: Some(path.into_iter().flatten().collect()),
                final_state: Some(s),
                states_explored: seen.len(),
                bound_hit,
            };
        }
        let succ = successors(p, &s, q.mode);
        if q.bound.is_some_and(|b| nodes[id].depth >= b) {
            bound_hit |= !succ.is_empty();
            continue;
        }
        let depth = nodes[id].depth + 1;
        let mut batch = Vec::new();
        for (evs, n) in succ {
            if seen.contains_key(&n.key()) {
                continue;
            }
            seen.insert(n.key(), nodes.len());
            batch.push((nodes.len(), n));
            nodes.push(Node { parent: id, events: evs, depth });
        }
        // Depth-first search explores the first successor first.
        if q.search == Search::Dfs {
            batch.reverse();
        }
        frontier.extend(batch);
    }
    ReachResult { reachable: false, path: None, final_state: None, states_explored: seen.len(), bound_hit }
}

/// Whether some process can reach the error location.
pub fn reachable_error(p: &Program, mode: Mode, bound: Option<usize>) -> ReachResult {
    reach(&ReachQuery { program: p, target: ReachTarget::Error, bound, mode, search: Search::Dfs })
}

/// Whether a terminal state satisfying `pred` is reachable.
pub fn reachable_valuation(p: &Program, pred: &StatePred, mode: Mode, bound: Option<usize>) -> ReachResult {
    reach(&ReachQuery {
        program: p,
        target: ReachTarget::Pred { pred: pred.clone(), at_end: true },
        bound,
        mode,
        search: Search::Dfs,
    })
}
