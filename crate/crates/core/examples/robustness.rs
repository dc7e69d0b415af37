//! Runs the enumerative check on robsto under both trace notions.

use sirobust::ir::parse_program;
use sirobust::traces::check_robustness_enumerative;

fn main() {
    let p = parse_program(include_str!("../corpus/robsto.txn")).unwrap();
    for value_aware in [false, true] {
        let r = check_robustness_enumerative(&p, value_aware, None);
        let cycle = r.witness.map(|w| w.cycle.iter().map(|t| t.name(&p)).collect::<Vec<_>>());
        println!("value-aware {value_aware}: robust {} ({} states), cycle {cycle:?}", r.robust, r.states);
    }
}
