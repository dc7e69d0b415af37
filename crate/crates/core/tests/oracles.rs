//! The library checked against brute-force oracles on small programs.

mod common;

use std::collections::{BTreeSet, HashSet};

use common::*;
use sirobust::cli::{generate_program, GenConfig};
use sirobust::reach::{reach, ReachQuery, ReachTarget};
use sirobust::semantics::{enabled, enumerate_executions, initial_state, Dedup, Mode, StatePred};
use sirobust::traces::{check_robustness_enumerative, is_serializable, trace_of, Rel};

#[test]
fn ws_execution_counts() {
    let p = corpus("ws");
    // Two processes with four events each; nothing blocks under SI.
    assert_eq!(multinomial(&[4, 4]), 70);
    assert_eq!(enumerate_executions(&p, Mode::Si, None).dedup(Dedup::None).count(), 70);
    // Under SER the two transactions run one after the other.
    assert_eq!(enumerate_executions(&p, Mode::Ser, None).dedup(Dedup::None).count(), 2);
}

#[test]
fn execution_counts_match_the_interleaving_count() {
    let cfg = GenConfig::new(2, 2, 2, 2, 2);
    let mut checked = 0;
    for seed in 0..300 {
        let p = generate_program(&cfg, seed);
        if !conflict_free(&p) {
            continue;
        }
        let lens: Vec<usize> = (0..p.processes.len()).map(|q| straight_line_events(&p, q)).collect();
        let si = enumerate_executions(&p, Mode::Si, None).dedup(Dedup::None).count() as u128;
        assert_eq!(si, multinomial(&lens), "seed {seed}");
        let txns: Vec<usize> = p.processes.iter().map(|pr| pr.txns.len()).collect();
        let ser = enumerate_executions(&p, Mode::Ser, None).dedup(Dedup::None).count() as u128;
        assert_eq!(ser, multinomial(&txns), "seed {seed}");
        checked += 1;
    }
    assert!(checked >= 20, "only {checked} conflict-free programs");
}

/// Generated programs with at most `cap` SI interleavings, so that the
/// brute-force oracles stay fast.
fn small_programs(cfg: &GenConfig, seeds: std::ops::Range<u64>, cap: u128) -> Vec<sirobust::ir::Program> {
    seeds
        .map(|s| generate_program(cfg, s))
        .filter(|p| {
            let lens: Vec<usize> = (0..p.processes.len()).map(|q| straight_line_events(p, q)).collect();
            multinomial(&lens) <= cap
        })
        .collect()
}

#[test]
fn engine_matches_brute_force() {
    let programs = small_programs(&GenConfig::new(2, 2, 3, 2, 2), 0..300, 10_000);
    let mut non_robust = [0, 0];
    for p in &programs {
        for va in [false, true] {
            let b = brute_robust(p, va);
            let r = check_robustness_enumerative(p, va, None);
            assert_eq!(r.robust, b, "{} value_aware {va}", p.name);
            non_robust[usize::from(va)] += usize::from(!b);
        }
    }
    // Frozen from the brute-force run: value-blind and value-aware violations.
    assert_eq!((programs.len(), non_robust), (256, [9, 2]));
}

#[test]
fn engine_matches_brute_force_on_the_corpus() {
    for name in ["ws", "ws_variant", "robsto", "robrfo", "rwc", "guarded_swap", "courseware_mini", "empty"] {
        let p = corpus(name);
        for va in [false, true] {
            assert_eq!(check_robustness_enumerative(&p, va, None).robust, brute_robust(&p, va), "{name} {va}");
        }
    }
}

#[test]
fn hb_acyclicity_matches_the_permutation_oracle() {
    let (mut total, mut cyclic) = (0, 0);
    for p in small_programs(&GenConfig::new(2, 2, 3, 2, 2), 0..300, 10_000) {
        for e in enumerate_executions(&p, Mode::Si, None).dedup(Dedup::None) {
            let t = trace_of(&p, &e.events, false).unwrap();
            let ser = is_serializable(&t);
            assert_eq!(ser, perm_serializable(&e.events), "{}", p.name);
            total += 1;
            cyclic += usize::from(!ser);
        }
    }
    assert_eq!((total, cyclic), (162_617, 8_087));
}

#[test]
fn read_from_matches_the_snapshot_rule() {
    let cfg = GenConfig::new(3, 2, 2, 2, 2);
    for seed in 0..40 {
        let p = generate_program(&cfg, seed);
        for e in enumerate_executions(&p, Mode::Si, None).dedup(Dedup::States).take(200) {
            let t = trace_of(&p, &e.events, false).unwrap();
            let raw = raw_txns(&e.events);
            let want: BTreeSet<_> = rf_sources(&raw)
                .into_iter()
                .filter_map(|((r, _), w)| w.map(|w| (raw[w].id, raw[r].id)))
                .collect();
            assert_eq!(t.relation(Rel::Rf), want, "seed {seed}");
        }
    }
}

/// Quiescent states reachable under SER by single steps, computed as a
/// plain fixpoint.
fn ser_quiescent_states(p: &sirobust::ir::Program) -> HashSet<Vec<u8>> {
    let s0 = initial_state(p);
    let mut seen = HashSet::from([s0.key()]);
    let mut todo = vec![s0];
    let mut quiescent = HashSet::new();
    while let Some(s) = todo.pop() {
        if s.active_proc().is_none() {
            quiescent.insert(s.key());
        }
        for (_, n) in enabled(p, &s, Mode::Ser) {
            if seen.insert(n.key()) {
                todo.push(n);
            }
        }
    }
    quiescent
}

#[test]
fn ser_reach_explores_exactly_the_quiescent_states() {
    let never = StatePred::Not(Box::new(StatePred::True));
    for seed in 0..60 {
        let p = generate_program(&GenConfig::default(), seed);
        let r = reach(&ReachQuery::new(&p, ReachTarget::Pred { pred: never.clone(), at_end: false }));
        assert_eq!(r.states_explored, ser_quiescent_states(&p).len(), "seed {seed}");
    }
    for name in CORPUS {
        let p = corpus(name);
        let r = reach(&ReachQuery::new(&p, ReachTarget::Pred { pred: never.clone(), at_end: false }));
        assert_eq!(r.states_explored, ser_quiescent_states(&p).len(), "{name}");
    }
}
