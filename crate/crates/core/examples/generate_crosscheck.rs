//! Generates random programs and compares the enumerative and reduction
//! verdicts on them.

use sirobust::cli::{crosscheck_generated, GenConfig};

fn main() {
    let s = crosscheck_generated(&GenConfig::new(3, 2, 3, 2, 2), 0, 50, None);
    print!("{}", s.to_table());
    println!("{} disagreements, {} errors", s.disagreements(), s.errors());
}
