//! Counts the executions of write skew under SI and under SER, and prints
//! the first SI execution.

use sirobust::ir::parse_program;
use sirobust::semantics::{enumerate_executions, events_to_text, Dedup, Mode};

fn main() {
    let p = parse_program(include_str!("../corpus/ws.txn")).unwrap();
    for mode in [Mode::Si, Mode::Ser] {
        let n = enumerate_executions(&p, mode, None).dedup(Dedup::None).count();
        println!("{mode:?}: {n} executions");
    }
    let first = enumerate_executions(&p, Mode::Si, None).next().unwrap();
    print!("{}", events_to_text(&p, &first.events));
}
