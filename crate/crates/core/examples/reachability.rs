//! Checks the invalid Courseware state under both semantics.

use sirobust::ir::parse_program;
use sirobust::reach::reachable_valuation;
use sirobust::semantics::{events_to_text, Mode, StatePred};

fn main() {
    let p = parse_program(include_str!("../corpus/courseware_mini.txn")).unwrap();
    let pred = StatePred::parse(&p, "removed=1 && enrolled=1").unwrap();
    for mode in [Mode::Ser, Mode::Si] {
        let r = reachable_valuation(&p, &pred, mode, None);
        println!("{mode:?}: reachable {} ({} states)", r.reachable, r.states_explored);
        if let Some(path) = r.path {
            print!("{}", events_to_text(&p, &path));
        }
    }
}
