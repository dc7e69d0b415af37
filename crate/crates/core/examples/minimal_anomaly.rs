//! Finds a minimal anomaly of the SmallBank model and checks its shape.

use sirobust::ir::parse_program;
use sirobust::semantics::events_to_text;
use sirobust::traces::{check_anomaly_conditions, find_minimal_anomaly};

fn main() {
    let p = parse_program(include_str!("../corpus/smallbank_mini.txn")).unwrap();
    let m = find_minimal_anomaly(&p, None).expect("SmallBank is not robust");
    print!("{}", events_to_text(&p, &m.events));
    println!("delayed {}", m.delayed.name(&p));
    println!("rw({}) into {}, rw({}) from {}", p.vars[m.x], m.a.name(&p), p.vars[m.y], m.b.name(&p));
    println!("{:?}", check_anomaly_conditions(&p, &m.events, m.delayed));
}
