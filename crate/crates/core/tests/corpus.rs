//! Verdicts on the bundled corpus and the generator's fixed outputs.

mod common;

use std::collections::BTreeSet;

use common::*;
use sirobust::cli::{generate_program, GenConfig};
use sirobust::instrument::check_robustness_by_reduction;
use sirobust::ir::print_program;
use sirobust::movers::{check_robustness_cdg, syntactic_robustness_check, RobustReason};
use sirobust::traces::{check_anomaly_conditions, check_robustness_enumerative, find_minimal_anomaly};

/// (name, value-blind robust, value-aware robust, CDG proves it)
const EXPECTED: [(&str, bool, bool, bool); 10] = [
    ("ws", false, false, false),
    ("ws_variant", true, true, true),
    ("robsto", false, true, true),
    ("robrfo", false, true, true),
    ("rwc", false, false, false),
    ("guarded_swap", true, true, true),
    ("smallbank_mini", false, false, false),
    ("courseware_mini", false, false, false),
    ("playlist_mini", true, true, true),
    ("empty", true, true, true),
];

#[test]
fn corpus_verdicts() {
    for (name, vb, va, cdg) in EXPECTED {
        let p = corpus(name);
        assert_eq!(check_robustness_enumerative(&p, false, None).robust, vb, "{name} value-blind");
        assert_eq!(check_robustness_enumerative(&p, true, None).robust, va, "{name} value-aware");
        assert_eq!(check_robustness_by_reduction(&p, None).robust, vb, "{name} reduction");
        assert_eq!(check_robustness_cdg(&p, None).verdict.is_proved(), cdg, "{name} CDG");
    }
}

#[test]
fn only_the_empty_program_is_syntactically_robust() {
    for name in CORPUS {
        let want = (name == "empty").then_some(RobustReason::SingleAccess);
        assert_eq!(syntactic_robustness_check(&corpus(name)), want, "{name}");
    }
}

#[test]
fn generator_output_is_stable() {
    let p = generate_program(&GenConfig::new(2, 1, 2, 2, 2), 0);
    assert_eq!(print_program(&p), include_str!("golden/gen_seed0.txn"));
}

#[test]
fn seeds_give_distinct_programs() {
    let cfg = GenConfig::default();
    let texts: BTreeSet<String> = (0..100).map(|s| print_program(&generate_program(&cfg, s))).collect();
    assert_eq!(texts.len(), 100);
}

#[test]
fn single_access_programs_are_syntactically_robust() {
    for seed in 0..100 {
        let p = generate_program(&GenConfig::new(1, 1, 1, 1, 2), seed);
        assert_eq!(syntactic_robustness_check(&p), Some(RobustReason::SingleAccess), "seed {seed}");
    }
}

#[test]
fn minimal_anomaly_ignores_anti_dependencies_from_earlier_transactions() {
    // A transaction committed before the delayed one began also reads the
    // variable the delayed one writes; the pair must come from later ones.
    let p = generate_program(&GenConfig::new(3, 3, 3, 2, 2), 28);
    let m = find_minimal_anomaly(&p, None).unwrap();
    assert!(m.beta.contains(&m.a) && m.beta.contains(&m.b));
    assert!(check_anomaly_conditions(&p, &m.events, m.delayed).all());
}
