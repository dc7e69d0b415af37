//! Instruments write skew and searches the serial executions of the result
//! for the error state.

use sirobust::instrument::{check_robustness_by_reduction, instrument};
use sirobust::ir::{parse_program, print_program};
use sirobust::semantics::events_to_text;

fn main() {
    let p = parse_program(include_str!("../corpus/ws.txn")).unwrap();
    let inst = instrument(&p);
    println!("{} instructions after instrumentation", inst.program.instr_count());
    if std::env::args().any(|a| a == "--print") {
        print!("{}", print_program(&inst.program));
    }
    let r = check_robustness_by_reduction(&p, None);
    println!("robust: {} ({} states)", r.robust, r.states_explored);
    if let Some(w) = r.witness {
        print!("{}", events_to_text(&p, &w.events));
    }
}
