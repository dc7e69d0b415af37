//! Robustness analysis of transactional programs against snapshot isolation.
//!
//! A program is robust when every execution it admits under snapshot
//! isolation (SI) produces a trace that some serial execution also produces.
//! The crate offers three ways to decide or approximate this:
//!
//! * [`traces::check_robustness_enumerative`] explores SI executions and looks
//!   for a happens-before cycle between transactions (exact, bounded by the
//!   state space).
//! * [`instrument::check_robustness_by_reduction`] rewrites the program so that
//!   a non-robust SI behavior becomes an error state reachable under
//!   serializability, then runs [`reach`] on it.
//! * [`movers::check_robustness_cdg`] builds a commutativity dependency graph
//!   and either proves robustness or reports a suspicious cycle.
//!
//! Runnable examples, one per capability, live in `examples/`:
//! `parse_print`, `enumerate`, `happens_before`, `robustness`,
//! `minimal_anomaly`, `reduction`, `movers_proof`, `reachability`,
//! `generate_crosscheck`.

pub mod cli;
pub mod instrument;
pub mod ir;
pub mod movers;
pub mod reach;
pub mod semantics;
pub mod traces;
