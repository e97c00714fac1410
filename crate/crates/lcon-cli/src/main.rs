//! `lcon` — a workbench for the contract calculus: evaluate programs,
//! statically simplify their contracts, and differentially test the
//! simplifier.
//!
//! Exit codes: 0 success / value, 1 usage or input error, 2 blame or
//! detected violation, 3 stuck, out of fuel, or transformation budget
//! exhausted, 4 inconclusive comparison.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lcon_cli::diff::diff_program;
use lcon_cli::fuzz::{run_fuzz, FuzzConfig};
use lcon_cli::load_program;
use lcon_cli::pipeline::{transform, Level, OutcomeSummary, Transformed};
use lcon_core::{print_term, run_from, ConstraintStore, EvalConfig, ImplicationEnv, Term};

#[derive(Parser)]
#[command(
    name = "lcon",
    version,
    about = "Run, simplify, and differentially test higher-order contracts"
)]
struct Cli {
    /// Predicate implication facts (one `P <= Q` per line) replacing
    /// the built-in ordering
    #[arg(long, global = true, value_name = "FILE")]
    gamma: Option<PathBuf>,

    /// Small-step budget for each evaluation
    #[arg(long, global = true, default_value_t = 1_000_000, value_name = "N")]
    fuel: u64,

    /// Also print the constraint store
    #[arg(long, global = true)]
    dump_constraints: bool,

    /// Emit one JSON object instead of text
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a program and report its outcome
    Run {
        file: PathBuf,
    },
    /// Statically simplify a program's contracts
    Simplify {
        file: PathBuf,
        /// Normalization tier
        #[arg(long, value_enum, default_value_t = Level::Subset)]
        level: Level,
        /// Skip the join and condense passes after subset normalization
        #[arg(long)]
        no_join: bool,
        /// Print every rewrite step before the result
        #[arg(long)]
        trace: bool,
        /// Print a JSON summary of rules fired and predicate counts
        #[arg(long)]
        report: bool,
    },
    /// Count dynamic contract checks, optionally after simplification
    Count {
        file: PathBuf,
        /// Simplify at this tier before counting
        #[arg(long, value_enum)]
        level: Option<Level>,
        /// Apply the (possibly simplified) program to this integer first
        #[arg(long, value_name = "INT", allow_negative_numbers = true)]
        call: Option<i64>,
    },
    /// Compare original and simplified behaviour of one program
    Diff {
        file: PathBuf,
        /// Tier to test; baseline demands identical outcomes
        #[arg(long, value_enum, default_value_t = Level::Baseline)]
        level: Level,
    },
    /// Generate random programs and differentially test the simplifier
    Fuzz {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        cases: u32,
        #[arg(long, value_enum, default_value_t = Level::Baseline)]
        level: Level,
        #[arg(long, default_value_t = 4)]
        term_depth: u32,
        #[arg(long, default_value_t = 2)]
        contract_depth: u32,
        /// Maximum distinct blame labels per generated program
        #[arg(long, default_value_t = 4)]
        labels: u32,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0u8,
                _ => 1u8,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let env = match load_env(cli.gamma.as_deref()) {
        Ok(env) => env,
        Err(message) => {
            eprintln!("{message}");
            return ExitCode::from(1);
        }
    };
    let code = match &cli.command {
        Command::Run { file } => cmd_run(&cli, file),
        Command::Simplify {
            file,
            level,
            no_join,
            trace,
            report,
        } => cmd_simplify(&cli, file, *level, *no_join, *trace, *report, &env),
        Command::Count { file, level, call } => cmd_count(&cli, file, *level, *call, &env),
        Command::Diff { file, level } => cmd_diff(&cli, file, *level, &env),
        Command::Fuzz {
            seed,
            cases,
            level,
            term_depth,
            contract_depth,
            labels,
        } => cmd_fuzz(
            &cli,
            FuzzConfig {
                seed: *seed,
                cases: *cases,
                term_depth: *term_depth,
                contract_depth: *contract_depth,
                label_budget: *labels,
                level: *level,
            },
            &env,
        ),
    };
    ExitCode::from(code)
}

fn load_env(gamma: Option<&Path>) -> Result<ImplicationEnv, String> {
    match gamma {
        None => Ok(ImplicationEnv::standard()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("error: cannot read {}: {e}", path.display()))?;
            ImplicationEnv::from_config_text(&text)
                .map_err(|e| format!("error: invalid gamma file {}: {e}", path.display()))
        }
    }
}

fn store_lines(store: &ConstraintStore) -> Vec<String> {
    store.dump().lines().map(str::to_string).collect()
}

fn emit_json(value: serde_json::Value) {
    match serde_json::to_string_pretty(&value) {
        Ok(text) => println!("{text}"),
        Err(e) => eprintln!("error: cannot serialize output: {e}"),
    }
}

fn cmd_run(cli: &Cli, file: &Path) -> u8 {
    let program = match load_program(file) {
        Ok(p) => p,
        Err(message) => {
            eprintln!("error: {message}");
            return 1;
        }
    };
    let outcome = run_from(
        ConstraintStore::new(),
        program.term.clone(),
        &EvalConfig { fuel: cli.fuel },
    );
    let summary = OutcomeSummary::of(&outcome);
    if cli.json {
        let mut obj = serde_json::json!({
            "program": program.origin,
            "outcome": summary,
        });
        if cli.dump_constraints {
            obj["constraints"] = serde_json::json!(store_lines(outcome.store()));
        }
        emit_json(obj);
    } else {
        println!("{}", summary.describe());
        println!("checks: {}", summary.checks());
        if cli.dump_constraints {
            print!("{}", outcome.store().dump());
        }
    }
    summary.exit_code() as u8
}

fn report_json(t: &Transformed) -> serde_json::Value {
    serde_json::json!({
        "rule_counts": t.rule_counts(),
        "branches_max": t.branches_max,
        "predicates_before": t.predicates_before,
        "predicates_after": t.predicates_after,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_simplify(
    cli: &Cli,
    file: &Path,
    level: Level,
    no_join: bool,
    trace: bool,
    report: bool,
    env: &ImplicationEnv,
) -> u8 {
    let program = match load_program(file) {
        Ok(p) => p,
        Err(message) => {
            eprintln!("error: {message}");
            return 1;
        }
    };
    let transformed = match transform(&program, level, no_join, env) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return 3;
        }
    };
    if cli.json {
        let mut obj = serde_json::json!({
            "program": program.origin,
            "level": level,
            "term": print_term(&transformed.term),
        });
        if trace {
            let steps: Vec<serde_json::Value> = transformed
                .steps
                .iter()
                .map(|s| {
                    serde_json::json!({
                        "rule": s.rule,
                        "path": s.path,
                        "before": print_term(&s.before),
                        "after": print_term(&s.after),
                    })
                })
                .collect();
            obj["steps"] = serde_json::json!(steps);
        }
        if report {
            obj["report"] = report_json(&transformed);
        }
        if cli.dump_constraints {
            obj["constraints"] = serde_json::json!(store_lines(&transformed.store));
        }
        emit_json(obj);
    } else {
        if trace {
            for (i, step) in transformed.steps.iter().enumerate() {
                println!("{:>4} {:<28} {:?}", i, step.rule, step.path);
            }
        }
        println!("{}", print_term(&transformed.term));
        if report {
            emit_json(report_json(&transformed));
        }
        if cli.dump_constraints {
            print!("{}", transformed.store.dump());
        }
    }
    0
}

fn cmd_count(
    cli: &Cli,
    file: &Path,
    level: Option<Level>,
    call: Option<i64>,
    env: &ImplicationEnv,
) -> u8 {
    let program = match load_program(file) {
        Ok(p) => p,
        Err(message) => {
            eprintln!("error: {message}");
            return 1;
        }
    };
    let (store, mut term) = match level {
        None => (ConstraintStore::new(), program.term.clone()),
        Some(l) => match transform(&program, l, false, env) {
            Ok(t) => (t.store, t.term),
            Err(e) => {
                eprintln!("error: {e}");
                return 3;
            }
        },
    };
    if let Some(n) = call {
        term = Term::app(term, Term::int(n));
    }
    let outcome = run_from(store, term, &EvalConfig { fuel: cli.fuel });
    let summary = OutcomeSummary::of(&outcome);
    if cli.json {
        let mut obj = serde_json::json!({
            "program": program.origin,
            "level": level.map(|l| l.name()),
            "call": call,
            "checks": summary.checks(),
            "outcome": summary.class(),
        });
        if cli.dump_constraints {
            obj["constraints"] = serde_json::json!(store_lines(outcome.store()));
        }
        emit_json(obj);
    } else {
        println!("checks: {}", summary.checks());
        if cli.dump_constraints {
            print!("{}", outcome.store().dump());
        }
    }
    summary.exit_code() as u8
}

fn cmd_diff(cli: &Cli, file: &Path, level: Level, env: &ImplicationEnv) -> u8 {
    let program = match load_program(file) {
        Ok(p) => p,
        Err(message) => {
            eprintln!("error: {message}");
            return 1;
        }
    };
    let report = diff_program(&program, level, env, cli.fuel);
    if cli.json {
        match serde_json::to_value(&report) {
            Ok(v) => emit_json(v),
            Err(e) => eprintln!("error: cannot serialize output: {e}"),
        }
    } else {
        println!("program: {}", report.program);
        println!("level: {}", report.level);
        println!(
            "original: {} (checks {})",
            report.outcome_original.describe(),
            report.checks_original
        );
        match (&report.outcome_transformed, report.checks_transformed) {
            (Some(outcome), Some(checks)) => {
                println!("transformed: {} (checks {})", outcome.describe(), checks);
            }
            _ => println!("transformed: (not produced)"),
        }
        println!("verdict: {}", report.verdict.describe());
    }
    report.verdict.exit_code() as u8
}

fn cmd_fuzz(cli: &Cli, config: FuzzConfig, env: &ImplicationEnv) -> u8 {
    let summary = run_fuzz(&config, env, cli.fuel);
    if cli.json {
        match serde_json::to_value(&summary) {
            Ok(v) => emit_json(v),
            Err(e) => eprintln!("error: cannot serialize output: {e}"),
        }
    } else {
        print!("{}", summary.render_text());
    }
    summary.exit_code() as u8
}
