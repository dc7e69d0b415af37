//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//! Runs without the libtest harness so the report is always printed.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use sirobust::cli::{generate_program, GenConfig};
use sirobust::instrument::check_robustness_by_reduction;
use sirobust::ir::Program;
use sirobust::movers::{check_robustness_cdg, find_non_mover_cycle, syntactic_robustness_check, ProofVerdict};
use sirobust::reach::reachable_valuation;
use sirobust::semantics::{enumerate_executions, Dedup, Mode, StatePred};
use sirobust::traces::{
    check_anomaly_conditions, check_robustness_enumerative, find_minimal_anomaly, is_serializable, trace_of, Witness,
};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    ensure(start.elapsed() < limit, format!("took {:?}, limit {limit:?}", start.elapsed()))
}

fn cycle_names(p: &Program, w: &Witness) -> BTreeSet<String> {
    w.cycle.iter().map(|t| p.tid(sirobust::ir::TxnRef { proc: t.proc, txn: t.txn }).to_string()).collect()
}

fn names(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// The seeded random corpus of criteria 5 and 6.
fn random_corpus() -> Vec<Program> {
    (0..200).map(|s| generate_program(&GenConfig::new(3, 3, 3, 2, 2), s)).collect()
}

/// Final states satisfying `pred` among the maximal executions under `mode`.
fn enumeration_hits(p: &Program, pred: &StatePred, mode: Mode) -> usize {
    enumerate_executions(p, mode, None).dedup(Dedup::None).filter(|e| e.final_state.all_done() && pred.eval(&e.final_state)).count()
}

fn c1_write_skew() -> Check {
    let t = Instant::now();
    let p = corpus("ws");
    let pred = StatePred::parse(&p, "r1=0 && r2=0").map_err(|e| e.to_string())?;
    let si = enumeration_hits(&p, &pred, Mode::Si);
    let ser = enumeration_hits(&p, &pred, Mode::Ser);
    ensure(si > 0, "SI never yields r1=r2=0")?;
    ensure(ser == 0, "SER yields r1=r2=0")?;
    let e = check_robustness_enumerative(&p, false, None);
    let w = e.witness.as_ref().ok_or("enumeration found no violation")?;
    ensure(cycle_names(&p, w) == names(&["t1", "t2"]), format!("cycle {:?}", cycle_names(&p, w)))?;
    let r = check_robustness_by_reduction(&p, None);
    ensure(!r.robust && r.witness.is_some(), "instrumented program does not reach the error")?;
    within(t, Duration::from_secs(1))?;
    Ok(format!("{si} SI executions end with r1=r2=0, 0 under SER; cycle {{t1, t2}}; error reached"))
}

fn c2_ws_variant() -> Check {
    let t = Instant::now();
    let p = corpus("ws_variant");
    ensure(check_robustness_enumerative(&p, false, None).robust, "enumeration found a violation")?;
    let r = check_robustness_by_reduction(&p, None);
    ensure(r.robust && !r.bound_hit, "error reachable or search cut")?;
    let c = check_robustness_cdg(&p, None);
    ensure(c.verdict == ProofVerdict::Proved, format!("{:?}", c.verdict))?;
    ensure(find_non_mover_cycle(&c.graph, &p).is_none(), "graph has a non-mover cycle")?;
    within(t, Duration::from_secs(1))?;
    Ok(format!("robust; {} instrumented states, none erroneous; CDG proved with {} m-edges", r.states_explored, c.graph.m_edges().len()))
}

fn c3_value_aware() -> Check {
    let t = Instant::now();
    let mut out = Vec::new();
    for name in ["robsto", "robrfo"] {
        let p = corpus(name);
        let va = check_robustness_enumerative(&p, true, None);
        ensure(va.robust && !va.bound_hit, format!("{name}: value-aware verdict is not robust"))?;
        let vb = check_robustness_enumerative(&p, false, None);
        let w = vb.witness.as_ref().ok_or(format!("{name}: value-blind traces are all acyclic"))?;
        out.push(format!("{name} value-blind cycle {:?}", cycle_names(&p, w)));
    }
    within(t, Duration::from_secs(5))?;
    Ok(format!("value-aware robust; {}", out.join(", ")))
}

fn app_check(name: &str, txns: &[&str], invalid: &str) -> Check {
    let t = Instant::now();
    let p = corpus(name);
    let want = names(txns);
    let e = check_robustness_enumerative(&p, false, None);
    let w = e.witness.as_ref().ok_or(format!("{name}: robust by enumeration"))?;
    ensure(cycle_names(&p, w) == want, format!("{name}: enumeration cycle {:?}", cycle_names(&p, w)))?;
    let r = check_robustness_by_reduction(&p, None);
    let rw = r.witness.as_ref().ok_or(format!("{name}: robust by reduction"))?;
    ensure(cycle_names(&p, rw) == want, format!("{name}: reduction cycle {:?}", cycle_names(&p, rw)))?;
    let pred = StatePred::parse(&p, invalid).map_err(|e| e.to_string())?;
    ensure(reachable_valuation(&p, &pred, Mode::Si, None).reachable, format!("{name}: invalid state unreachable under SI"))?;
    let ser = reachable_valuation(&p, &pred, Mode::Ser, None);
    ensure(!ser.reachable && !ser.bound_hit, format!("{name}: invalid state reachable under SER"))?;
    within(t, Duration::from_secs(60))?;
    Ok(format!("{name} cycle {:?}, `{invalid}` SI-only", want))
}

fn c4_applications() -> Check {
    let a = app_check("smallbank_mini", &["Balance", "TransactSaving", "WriteCheck"], "od=1 && s=1 && c=0")?;
    let b = app_check("courseware_mini", &["RemoveCourse", "EnrollStudent"], "removed=1 && enrolled=1")?;
    Ok(format!("{a}; {b}"))
}

fn c5_reduction_equivalence(corpus: &[Program]) -> Check {
    let t = Instant::now();
    let mut non_robust = 0;
    for p in corpus {
        let e = check_robustness_enumerative(p, false, None);
        let r = check_robustness_by_reduction(p, None);
        ensure(!e.bound_hit && !r.bound_hit, format!("{}: search cut", p.name))?;
        ensure(e.robust == r.robust, format!("{}: enumeration robust={} reduction robust={}", p.name, e.robust, r.robust))?;
        if !r.robust {
            ensure(r.witness.is_some(), format!("{}: error path does not map back", p.name))?;
            non_robust += 1;
        }
    }
    within(t, Duration::from_secs(30 * 60))?;
    Ok(format!("{}/{} agree ({non_robust} non-robust) in {:.1?}", corpus.len(), corpus.len(), t.elapsed()))
}

fn c6_cdg_soundness(corpus: &[Program]) -> Check {
    let mut proved = 0;
    for p in corpus {
        if check_robustness_cdg(p, None).verdict.is_proved() {
            proved += 1;
            ensure(check_robustness_enumerative(p, true, None).robust, format!("{}: proved but not robust", p.name))?;
        }
    }
    Ok(format!("{proved}/{} proved, 0 violations", corpus.len()))
}

fn c7_permutation_oracle(random: &[Program]) -> Check {
    let mut programs: Vec<Program> = CORPUS.iter().map(|n| corpus(n)).collect();
    programs.extend(random.iter().cloned());
    let (mut checked, mut cyclic) = (0, 0);
    for p in &programs {
        for e in enumerate_executions(p, Mode::Si, None).dedup(Dedup::States).take(400) {
            if raw_txns(&e.events).len() > 5 {
                continue;
            }
            let acyclic = is_serializable(&trace_of(p, &e.events, false).map_err(|e| e.to_string())?);
            ensure(acyclic == perm_serializable(&e.events), format!("{}: disagreement", p.name))?;
            checked += 1;
            cyclic += usize::from(!acyclic);
        }
    }
    ensure(cyclic > 0, "no cyclic trace in the corpus")?;
    Ok(format!("{checked} traces ({cyclic} cyclic), 0 disagreements"))
}

fn c8_minimal_anomalies(random: &[Program]) -> Check {
    let mut programs: Vec<Program> = CORPUS.iter().map(|n| corpus(n)).collect();
    programs.extend(random.iter().cloned());
    let mut found = 0;
    for p in &programs {
        let robust = check_robustness_enumerative(p, false, None).robust;
        let m = find_minimal_anomaly(p, None);
        ensure(m.is_some() != robust, format!("{}: anomaly found={} but robust={robust}", p.name, m.is_some()))?;
        if let Some(m) = m {
            let c = check_anomaly_conditions(p, &m.events, m.delayed);
            ensure(c.all(), format!("{}: conditions {c:?}", p.name))?;
            found += 1;
        }
    }
    Ok(format!("{found} anomalies, all satisfy (a)-(e)"))
}

fn c9_single_instruction() -> Check {
    for seed in 0..50 {
        let p = generate_program(&GenConfig::new(3, 3, 1, 2, 2), seed);
        ensure(syntactic_robustness_check(&p).is_some(), format!("seed {seed}: syntactic check fails"))?;
        for va in [false, true] {
            ensure(check_robustness_enumerative(&p, va, None).robust, format!("seed {seed}: enumeration (value-aware {va})"))?;
        }
        ensure(check_robustness_by_reduction(&p, None).robust, format!("seed {seed}: reduction"))?;
        ensure(check_robustness_cdg(&p, None).verdict.is_proved(), format!("seed {seed}: CDG"))?;
    }
    Ok("50/50 robust by syntax, enumeration, reduction, and CDG".into())
}

fn c10_guarded_swap() -> Check {
    let t = Instant::now();
    let p = corpus("guarded_swap");
    let c = check_robustness_cdg(&p, None);
    ensure(c.verdict.is_proved(), format!("{:?}", c.verdict))?;
    within(t, Duration::from_secs(5))?;
    Ok(format!("proved in {:.1?}", t.elapsed()))
}

fn main() {
    let random = random_corpus();
    let criteria: Vec<(&str, Box<dyn Fn() -> Check>)> = vec![
        ("write skew", Box::new(c1_write_skew)),
        ("write skew without the read of y", Box::new(c2_ws_variant)),
        ("value-aware traces (robsto, robrfo)", Box::new(c3_value_aware)),
        ("SmallBank and Courseware", Box::new(c4_applications)),
        ("reduction equals enumeration on 200 programs", Box::new(|| c5_reduction_equivalence(&random))),
        ("CDG proofs are sound on 200 programs", Box::new(|| c6_cdg_soundness(&random))),
        ("hb acyclicity equals the permutation oracle", Box::new(|| c7_permutation_oracle(&random))),
        ("minimal anomalies satisfy their shape", Box::new(|| c8_minimal_anomalies(&random))),
        ("single-instruction transactions are robust", Box::new(c9_single_instruction)),
        ("guarded swap is proved by the CDG", Box::new(c10_guarded_swap)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or(e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let dt = t.elapsed();
        match r {
            Ok(msg) => println!("PASS [{:>2}] {name} ({dt:.2?}): {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL [{:>2}] {name} ({dt:.2?}): {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
