//! Parses a program, validates it, and prints it back.

use sirobust::ir::{parse_program, print_program, validate_program};

const SRC: &str = "program demo
domain 2
vars x y

process p1 regs r1
  txn t1
    l0: begin; goto l1;
    l1: r1 := y; goto l2;
    l2: x := 1; goto l3;
    l3: commit;
";

fn main() {
    let p = parse_program(SRC).expect("parses");
    assert!(validate_program(&p).is_empty());
    println!("{} instructions, {} transactions", p.instr_count(), p.txn_count());
    print!("{}", print_program(&p));
}
