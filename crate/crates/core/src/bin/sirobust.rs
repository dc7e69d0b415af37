//! Command-line front end. Exit codes: 0 robust or proved, 1 non-robust,
//! 2 unknown or cut by the bound, 3 usage, parse, or I/O error, 4 the
//! methods contradict each other.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{error::ErrorKind, Args, Parser, Subcommand};
use sirobust::cli::{
    check, crosscheck_dir, crosscheck_generated, generate_program, load_program, report_to_json, report_to_text,
    CheckOptions, CrosscheckSummary, GenConfig, Method,
};
use sirobust::ir::print_program;
use sirobust::movers::{cdg_to_dot, cdg_to_json, compute_nonmover_relations};
use sirobust::reach::reachable_valuation;
use sirobust::semantics::{enumerate_executions, event_to_json, events_to_text, Dedup, Mode, StatePred};

const EXIT_ERROR: u8 = 3;
const EXIT_INCONSISTENT: u8 = 4;

#[derive(Parser)]
#[command(name = "sirobust", version, about = "Robustness of transactional programs against snapshot isolation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Enumerate executions, count them, or check whether a final state is reachable.
    Run {
        file: PathBuf,
        #[arg(long, default_value = "si")]
        mode: Mode,
        /// Print only the number of maximal executions.
        #[arg(long)]
        count: bool,
        /// Report whether a final state satisfying the predicate is reachable.
        #[arg(long = "assert", value_name = "PRED")]
        assert_pred: Option<String>,
        /// Maximum number of events per execution.
        #[arg(long)]
        bound: Option<usize>,
        /// Maximum number of executions printed.
        #[arg(long, default_value_t = 100)]
        limit: usize,
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
    },
    /// Decide or prove robustness.
    Check {
        file: PathBuf,
        #[arg(long, default_value = "all")]
        method: Method,
        /// Judge the enumerative verdict on value-aware traces.
        #[arg(long)]
        value_aware: bool,
        /// Step bound for the enumerative search and the reachability check.
        #[arg(long)]
        bound: Option<usize>,
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
    },
    /// Write pseudo-random programs.
    Generate {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, default_value_t = 1)]
        count: u64,
        /// Output directory; programs are printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the enumerative and reduction verdicts on a corpus.
    Crosscheck {
        /// Directory of `.txn` files. Without it, generated programs are used.
        dir: Option<PathBuf>,
        /// Number of generated programs.
        #[arg(long, default_value_t = 200)]
        random: u64,
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long)]
        bound: Option<usize>,
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
    },
    /// Print the commutativity dependency graph in DOT.
    CdgDot {
        file: PathBuf,
        #[arg(long, value_name = "PATH")]
        json: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    procs: usize,
    #[arg(long, default_value_t = 3)]
    txns: usize,
    #[arg(long, default_value_t = 3)]
    instrs: usize,
    #[arg(long, default_value_t = 2)]
    vars: usize,
    #[arg(long, default_value_t = 2)]
    domain: usize,
}

impl GenArgs {
    fn config(&self) -> Result<GenConfig, String> {
        let c = GenConfig::new(self.procs, self.txns, self.instrs, self.vars, self.domain);
        if [c.procs, c.txns, c.instrs, c.vars].contains(&0) || c.domain < 2 {
            return Err("generator bounds must be at least 1 (domain at least 2)".into());
        }
        Ok(c)
    }
}

fn write_json(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("SIROBUST_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_ERROR),
            };
        }
    };
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(cmd: Cmd) -> Result<u8, String> {
    match cmd {
        Cmd::Run { file, mode, count, assert_pred, bound, limit, json } => {
            let p = load_program(&file)?;
            if let Some(src) = assert_pred {
                let pred = StatePred::parse(&p, &src)?;
                let r = reachable_valuation(&p, &pred, mode, bound);
                if let Some(path) = &json {
                    let evs: Vec<_> = r.path.iter().flatten().map(|e| event_to_json(&p, e)).collect();
                    let v = serde_json::json!({ "reachable": r.reachable, "bound_hit": r.bound_hit, "states": r.states_explored, "path": evs });
                    write_json(path, &serde_json::to_string_pretty(&v).unwrap())?;
                }
                return Ok(if r.reachable {
                    println!("REACHABLE");
                    print!("{}", events_to_text(&p, r.path.as_deref().unwrap_or_default()));
                    1
                } else if r.bound_hit {
                    println!("UNREACHABLE within bound");
                    2
                } else {
                    println!("UNREACHABLE");
                    0
                });
            }
            let mut it = enumerate_executions(&p, mode, bound).dedup(Dedup::None);
            let mut n = 0usize;
            let mut dumped = Vec::new();
            for e in it.by_ref() {
                if !count && n < limit {
                    println!("# execution {n}{}", if e.blocked { " (blocked)" } else { "" });
                    print!("{}", events_to_text(&p, &e.events));
                }
                if json.is_some() && n < limit {
                    dumped.push(e.events.iter().map(|x| event_to_json(&p, x)).collect::<Vec<_>>());
                }
                n += 1;
            }
            if count || n > limit {
                println!("executions: {n}");
            }
            if let Some(path) = &json {
                let v = serde_json::json!({ "count": n, "bound_hit": it.bound_hit, "executions": dumped });
                write_json(path, &serde_json::to_string_pretty(&v).unwrap())?;
            }
            Ok(if it.bound_hit { 2 } else { 0 })
        }
        Cmd::Check { file, method, value_aware, bound, json } => {
            let p = load_program(&file)?;
            let r = check(&p, &CheckOptions { method, value_aware, bound });
            print!("{}", report_to_text(&r));
            if let Some(path) = &json {
                write_json(path, &report_to_json(&r))?;
            }
            if !r.inconsistencies.is_empty() {
                return Ok(EXIT_INCONSISTENT);
            }
            Ok(r.verdict.exit_code() as u8)
        }
        Cmd::Generate { gen, count, out } => {
            let cfg = gen.config()?;
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            }
            for seed in gen.seed..gen.seed + count {
                let p = generate_program(&cfg, seed);
                let text = print_program(&p);
                match &out {
                    Some(dir) => {
                        let f = dir.join(format!("{}.txn", p.name));
                        std::fs::write(&f, text).map_err(|e| format!("{}: {e}", f.display()))?;
                    }
                    None => println!("{text}"),
                }
            }
            Ok(0)
        }
        Cmd::Crosscheck { dir, random, gen, bound, json } => {
            let summary: CrosscheckSummary = match &dir {
                Some(d) => crosscheck_dir(d, bound).map_err(|e| format!("{}: {e}", d.display()))?,
                None => crosscheck_generated(&gen.config()?, gen.seed, random, bound),
            };
            print!("{}", summary.to_table());
            if let Some(path) = &json {
                write_json(path, &serde_json::to_string_pretty(&summary).unwrap())?;
            }
            Ok(if summary.disagreements() > 0 { 1 } else { 0 })
        }
        Cmd::CdgDot { file, json } => {
            let p = load_program(&file)?;
            let g = compute_nonmover_relations(&p, None);
            print!("{}", cdg_to_dot(&p, &g));
            if let Some(path) = &json {
                write_json(path, &serde_json::to_string_pretty(&cdg_to_json(&p, &g)).unwrap())?;
            }
            Ok(0)
        }
    }
}
