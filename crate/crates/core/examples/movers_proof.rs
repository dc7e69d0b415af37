//! Builds the commutativity dependency graph of a corpus program and
//! reports the proof verdict. Usage: `movers_proof [corpus-name]`.

use sirobust::ir::parse_program;
use sirobust::movers::{check_robustness_cdg, ProofVerdict};

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "ws_variant".into());
    let path = format!("{}/corpus/{name}.txn", env!("CARGO_MANIFEST_DIR"));
    let p = parse_program(&std::fs::read_to_string(path).unwrap()).unwrap();
    let r = check_robustness_cdg(&p, None);
    for ((a, b), labels) in r.graph.m_edges() {
        let l: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
        println!("{} -> {} [{}]", a.name(&p), b.name(&p), l.join(","));
    }
    match r.verdict {
        ProofVerdict::Proved => println!("proved robust"),
        ProofVerdict::Unknown { cycle: Some(c), .. } => println!("unknown: {}", c.describe(&p)),
        ProofVerdict::Unknown { .. } => println!("unknown: state space truncated"),
    }
}
