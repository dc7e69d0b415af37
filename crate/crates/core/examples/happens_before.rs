//! Builds the trace of the write-skew execution and prints its cycle and
//! the happens-before graph in DOT.

use sirobust::ir::parse_program;
use sirobust::semantics::events_from_text;
use sirobust::traces::{find_cycle, is_serializable, trace_of, trace_to_dot};

const EXECUTION: &str = "begin p1 t1[0]
load p1 t1[0] y 0
isu p1 t1[0] x 1
begin p2 t2[0]
load p2 t2[0] x 0
isu p2 t2[0] y 1
com p1 t1[0]
com p2 t2[0]
";

fn main() {
    let p = parse_program(include_str!("../corpus/ws.txn")).unwrap();
    let events = events_from_text(&p, EXECUTION).unwrap();
    let t = trace_of(&p, &events, false).unwrap();
    println!("serializable: {}", is_serializable(&t));
    if let Some(c) = find_cycle(&t) {
        let names: Vec<String> = c.iter().map(|u| u.name(&p)).collect();
        println!("cycle: {}", names.join(" -> "));
    }
    print!("{}", trace_to_dot(&p, &t));
}
