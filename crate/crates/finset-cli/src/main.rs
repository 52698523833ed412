//! `finset` — command-line front end for the finite-set solver.
//!
//! Reads an SMT-LIB-style script from a file (or stdin), answers `sat`,
//! `unsat`, or `unknown`, and optionally prints a model, solver statistics,
//! the peak region graph as DOT, or a brute-force cross-check of the verdict.
//!
//! Exit codes: 0 for any verdict, 1 for input errors, 2 for internal
//! invariant violations or an oracle disagreement.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, ValueEnum};
use finset_core::ast::{Ctx, Sort, Sym, TermId};
use finset_core::engine::Model;
use finset_core::frontend::{self, ParsedInput};
use finset_core::oracle::{self, Bound, Verdict};
use finset_core::{Outcome, Solver, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

impl OnOff {
    fn as_bool(self) -> bool {
        matches!(self, OnOff::On)
    }
}

/// Decision procedure for finite sets with cardinality constraints.
#[derive(Parser)]
#[command(name = "finset", version, about, disable_help_subcommand = true)]
struct Args {
    /// Input script; reads stdin when omitted.
    input: Option<PathBuf>,

    /// Print a model after a `sat` answer (scripts can also request this
    /// with `(get-model)`).
    #[arg(long)]
    get_model: bool,

    /// Print solver statistics to stderr.
    #[arg(long)]
    stats: bool,

    /// Print a one-line JSON statistics object as the last stdout line.
    #[arg(long)]
    stats_json: bool,

    /// Write the region graph at its peak size as DOT to FILE.
    #[arg(long, value_name = "FILE")]
    dump_graph: Option<PathBuf>,

    /// Decide each region leaf against the empty set eagerly [default: on].
    #[arg(long, value_name = "on|off")]
    guess_empty_set: Option<OnOff>,

    /// Guess cardinality lower bounds instead of arranging members
    /// [default: off].
    #[arg(long, value_name = "on|off")]
    guess_lower_bound: Option<OnOff>,

    /// Cross-check the verdict by brute-force model enumeration up to
    /// universe size N.
    #[arg(long, value_name = "N")]
    oracle_check: Option<u32>,

    /// Stop with `unknown` after N decisions.
    #[arg(long, value_name = "N")]
    decision_limit: Option<u64>,

    /// Stop with `unknown` after MS milliseconds.
    #[arg(long, value_name = "MS")]
    time_limit: Option<u64>,

    /// Solve every `*.smt2` file in DIR and print a summary table.
    #[arg(long, value_name = "DIR", conflicts_with = "input")]
    bench: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(args: Args) -> anyhow::Result<ExitCode> {
    if let Some(dir) = &args.bench {
        return run_bench(dir, &args);
    }

    let (text, name) = read_input(args.input.as_deref())?;
    let parsed = match frontend::parse(&text) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("{name}:{e}");
            return Ok(ExitCode::from(1));
        }
    };

    let opts = solver_options(&args, &parsed);
    let mut solver = Solver::new(parsed.ctx.clone(), &parsed.constraints, opts);
    let outcome = match solver.solve() {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(2));
        }
    };

    if let Some(path) = &args.dump_graph {
        let dot = solver
            .graph_dot()
            .unwrap_or("digraph regions {\n}\n")
            .to_string();
        fs::write(path, dot).with_context(|| format!("writing {}", path.display()))?;
    }

    println!("{}", verdict_str(&outcome));
    if let Outcome::Unknown(reason) = &outcome {
        eprintln!("note: {reason}");
    }
    if args.get_model || parsed.want_model {
        if let Outcome::Sat(model) = &outcome {
            print_model(&parsed.ctx, &parsed.decls, &parsed.card_apps, model);
        }
    }

    let mut code = ExitCode::SUCCESS;
    if let Some(max_universe) = args.oracle_check {
        code = oracle_check(&parsed, &outcome, max_universe);
    }

    if args.stats {
        print_stats(&solver);
    }
    if args.stats_json {
        let st = solver.stats();
        let json = serde_json::json!({
            "verdict": verdict_str(&outcome),
            "timeMs": st.elapsed.as_secs_f64() * 1e3,
            "decisions": st.decisions,
            "maxVertices": st.max_vertices,
            "maxLeaves": st.max_leaves,
            "ruleCounts": st.rule_applications,
        });
        println!("{json}");
    }
    Ok(code)
}

fn read_input(path: Option<&Path>) -> anyhow::Result<(String, String)> {
    match path {
        Some(p) => {
            let text =
                fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok((text, p.display().to_string()))
        }
        None => {
            let mut text = String::new();
            std::io::stdin()
                .read_to_string(&mut text)
                .context("reading stdin")?;
            Ok((text, "<stdin>".to_string()))
        }
    }
}

fn solver_options(args: &Args, parsed: &ParsedInput) -> SolverOptions {
    SolverOptions {
        guess_empty_set: args
            .guess_empty_set
            .map(OnOff::as_bool)
            .or(parsed.options.guess_empty_set)
            .unwrap_or(true),
        guess_lower_bound: args
            .guess_lower_bound
            .map(OnOff::as_bool)
            .or(parsed.options.guess_lower_bound)
            .unwrap_or(false),
        decision_limit: args.decision_limit,
        time_limit_ms: args.time_limit,
        lia_budget: None,
    }
}

fn verdict_str(out: &Outcome) -> &'static str {
    match out {
        Outcome::Sat(_) => "sat",
        Outcome::Unsat => "unsat",
        Outcome::Unknown(_) => "unknown",
    }
}

fn print_model(ctx: &Ctx, decls: &[Sym], card_apps: &[TermId], model: &Model) {
    println!("(");
    for &d in decls {
        let name = ctx.sym_name(d);
        match ctx.sym_sort(d) {
            Sort::Element => println!("  {} := {}", name, model.univ_name(model.elems[&d])),
            Sort::Set => {
                let parts: Vec<String> = model.sets[&d]
                    .iter()
                    .map(|&u| model.univ_name(u))
                    .collect();
                println!("  {} := {{{}}}", name, parts.join(", "));
            }
            Sort::Card => println!("  {} := {}", name, model.cards[&d]),
        }
    }
    for &t in card_apps {
        let cv = ctx
            .card_var_list()
            .iter()
            .find(|&&(_, tt)| tt == t)
            .map(|&(v, _)| v)
            .expect("every reported card application has a canonical variable");
        println!("  card({}) := {}", ctx.term_text(t), model.cards[&cv]);
    }
    println!(")");
}

fn oracle_check(parsed: &ParsedInput, outcome: &Outcome, max_universe: u32) -> ExitCode {
    let bound = Bound {
        max_universe,
        card_slack: 5,
    };
    let verdict = oracle::enumerate(&parsed.ctx, &parsed.constraints, &parsed.decls, bound);
    match (outcome, verdict) {
        (Outcome::Unsat, Verdict::NoModelUpTo(n)) => {
            println!("oracle: agree (no model \u{2264} {n})");
            ExitCode::SUCCESS
        }
        (Outcome::Unsat, Verdict::FoundModel(a)) => {
            eprintln!(
                "oracle: DISAGREE — answered unsat but a model with universe {} exists",
                a.universe
            );
            ExitCode::from(2)
        }
        (Outcome::Sat(_), Verdict::FoundModel(_)) => {
            println!("oracle: agree (model found)");
            ExitCode::SUCCESS
        }
        (Outcome::Sat(model), Verdict::NoModelUpTo(n)) => {
            if model.universe_size() > n {
                println!("oracle: inconclusive (our model exceeds bound {n})");
                ExitCode::SUCCESS
            } else {
                eprintln!(
                    "oracle: DISAGREE — answered sat with a universe-{} model but enumeration \
                     to {} found none",
                    model.universe_size(),
                    n
                );
                ExitCode::from(2)
            }
        }
        (Outcome::Unknown(_), _) => {
            println!("oracle: skipped (no verdict)");
            ExitCode::SUCCESS
        }
    }
}

fn print_stats(solver: &Solver) {
    let st = solver.stats();
    eprintln!("decisions:    {}", st.decisions);
    eprintln!("lia calls:    {}", st.lia_calls);
    eprintln!("max vertices: {}", st.max_vertices);
    eprintln!("max leaves:   {}", st.max_leaves);
    eprintln!("time:         {:.1}ms", st.elapsed.as_secs_f64() * 1e3);
    eprintln!("rule applications:");
    for (rule, count) in &st.rule_applications {
        eprintln!("  {rule}: {count}");
    }
}

fn run_bench(dir: &Path, args: &Args) -> anyhow::Result<ExitCode> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "smt2"))
        .collect();
    files.sort();

    let width = files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().len()))
        .max()
        .unwrap_or(4)
        .max(4);
    println!(
        "{:<width$}  {:<7}  {:>9}  {:>9}  {:>7}",
        "file", "output", "time", "#vertices", "#leaves"
    );
    for path in &files {
        let name = path.file_name().expect("listed file").to_string_lossy();
        let row = bench_one(path, args);
        println!(
            "{:<width$}  {:<7}  {:>9}  {:>9}  {:>7}",
            name, row.0, row.1, row.2, row.3
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn bench_one(path: &Path, args: &Args) -> (String, String, usize, usize) {
    let failed = |msg: &str| {
        eprintln!("{}: {}", path.display(), msg);
        ("error".to_string(), "-".to_string(), 0, 0)
    };
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return failed(&e.to_string()),
    };
    let parsed = match frontend::parse(&text) {
        Ok(p) => p,
        Err(e) => return failed(&e.to_string()),
    };
    let opts = solver_options(args, &parsed);
    let mut solver = Solver::new(parsed.ctx, &parsed.constraints, opts);
    let outcome = match solver.solve() {
        Ok(out) => out,
        Err(e) => return failed(&e.to_string()),
    };
    let st = solver.stats();
    (
        verdict_str(&outcome).to_string(),
        format!("{:.1}ms", st.elapsed.as_secs_f64() * 1e3),
        st.max_vertices,
        st.max_leaves,
    )
}
