//! Invariants over generated programs.

use std::collections::HashSet;

use proptest::prelude::*;
use sirobust::cli::{generate_program, GenConfig};
use sirobust::instrument::{check_robustness_by_reduction, instrument};
use sirobust::ir::{parse_program, print_program, validate_program, Program, TxnRef};
use sirobust::movers::{
    check_robustness_cdg, commutes_after, derive_variant, CommuteOutcome, TxnVariant, VariantKind,
};
use sirobust::reach::{reach, ReachQuery, ReachTarget, Search};
use sirobust::semantics::{atomic_successors_with, initial_state, replay_all, Mode, StatePred};
use sirobust::traces::{check_robustness_enumerative, is_serializable, trace_of};

fn config() -> impl Strategy<Value = GenConfig> {
    (2..=3usize, 1..=3usize, 1..=3usize, 1..=3usize, 2..=3usize)
        .prop_map(|(p, t, i, v, d)| GenConfig::new(p, t, i, v, d))
}

/// Programs small enough for exhaustive enumeration in a proptest case.
fn small() -> impl Strategy<Value = Program> {
    ((2..=3usize, 1..=2usize, 1..=3usize, 1..=2usize), any::<u64>())
        .prop_map(|((p, t, i, v), seed)| generate_program(&GenConfig::new(p, t, i, v, 2), seed))
}

fn without_last_txn(p: &Program, q: usize) -> Program {
    let mut p = p.clone();
    if p.processes[q].txns.len() > 1 {
        p.processes[q].txns.pop();
    } else {
        p.processes.remove(q);
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn print_parse_round_trip(cfg in config(), seed in any::<u64>()) {
        let p = generate_program(&cfg, seed);
        let text = print_program(&p);
        prop_assert_eq!(print_program(&parse_program(&text).unwrap()), text);
    }

    #[test]
    fn generator_is_deterministic_and_valid(cfg in config(), seed in any::<u64>()) {
        let p = generate_program(&cfg, seed);
        prop_assert_eq!(&p, &generate_program(&cfg, seed));
        prop_assert!(validate_program(&p).is_empty());
        prop_assert!((2..=cfg.procs).contains(&p.processes.len()));
    }

    #[test]
    fn witnesses_replay_and_are_cyclic(p in small(), va in any::<bool>()) {
        let r = check_robustness_enumerative(&p, va, None);
        if let Some(w) = r.witness {
            prop_assert!(replay_all(&p, &w.events, Mode::Si).is_ok());
            prop_assert!(!is_serializable(&trace_of(&p, &w.events, va).unwrap()));
            prop_assert!(w.cycle.len() >= 2);
        }
    }

    #[test]
    fn value_blind_robustness_implies_value_aware(p in small()) {
        if check_robustness_enumerative(&p, false, None).robust {
            prop_assert!(check_robustness_enumerative(&p, true, None).robust);
        }
    }

    #[test]
    fn reduction_agrees_with_enumeration(p in small()) {
        prop_assert_eq!(check_robustness_by_reduction(&p, None).robust, check_robustness_enumerative(&p, false, None).robust);
    }

    #[test]
    fn read_free_variant_covers_the_original(cfg in config(), seed in any::<u64>()) {
        let p = generate_program(&cfg, seed);
        let s = initial_state(&p);
        for q in 0..p.processes.len() {
            let t = &p.processes[q].txns[0];
            let free: HashSet<Vec<u8>> = atomic_successors_with(&p, &s, q, &derive_variant(t, VariantKind::ReadFree))
                .into_iter()
                .map(|(_, n)| n.key())
                .collect();
            for (_, n) in atomic_successors_with(&p, &s, q, t) {
                prop_assert!(free.contains(&n.key()));
            }
        }
    }

    #[test]
    fn disjoint_transactions_commute(cfg in config(), seed in any::<u64>()) {
        let p = generate_program(&cfg, seed);
        let s = initial_state(&p);
        let vars = |r: TxnRef| {
            let t = p.txn(r);
            t.read_set().union(&t.write_set()).copied().collect::<HashSet<_>>()
        };
        for q1 in 0..p.processes.len() {
            for q2 in 0..p.processes.len() {
                let (a, b) = (TxnRef { proc: q1, txn: 0 }, TxnRef { proc: q2, txn: 0 });
                if q1 == q2 || !vars(a).is_disjoint(&vars(b)) {
                    continue;
                }
                if let Ok(o) = commutes_after(&p, &s, TxnVariant::original(a), TxnVariant::original(b)) {
                    prop_assert_eq!(o, CommuteOutcome::Commutes);
                }
            }
        }
    }

    #[test]
    fn removing_a_final_transaction_keeps_a_proof(p in small(), pick in any::<prop::sample::Index>()) {
        if check_robustness_cdg(&p, None).verdict.is_proved() {
            let q = pick.index(p.processes.len());
            prop_assert!(check_robustness_cdg(&without_last_txn(&p, q), None).verdict.is_proved());
        }
    }

    #[test]
    fn bfs_and_dfs_agree(p in small(), x in 0..2u8, y in 0..2u8) {
        let src = format!("{} = {x} && {} = {y}", p.vars[0], p.vars[p.vars.len() - 1]);
        let pred = StatePred::parse(&p, &src).unwrap();
        let target = ReachTarget::Pred { pred, at_end: true };
        let mut answers = Vec::new();
        for mode in [Mode::Ser, Mode::Si] {
            for search in [Search::Dfs, Search::Bfs] {
                let mut q = ReachQuery::new(&p, target.clone());
                q.mode = mode;
                q.search = search;
                answers.push(reach(&q).reachable);
            }
        }
        prop_assert_eq!(answers[0], answers[1]);
        prop_assert_eq!(answers[2], answers[3]);
        // Every serial execution is an SI execution.
        prop_assert!(!answers[0] || answers[2]);
    }

    #[test]
    fn instrumentation_is_linear(cfg in config(), seed in any::<u64>()) {
        let p = generate_program(&cfg, seed);
        let size = instrument(&p).program.instr_count();
        prop_assert!(size <= LINEAR * p.instr_count(), "{} vs {}", size, p.instr_count());
    }
}

/// Instructions of the instrumented program per original instruction.
/// The largest ratio seen on generated programs is just under 25.
const LINEAR: usize = 32;
