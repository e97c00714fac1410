//! Property harness: generates random programs, simplifies them, and
//! checks the per-level verdicts plus termination and canonicity of
//! the normalization itself.  Failures are shrunk to smaller programs
//! that still exhibit a violation of the same kind.

use lcon_core::{parse_source_named, print_term, run, run_from, Constant, EvalConfig, ImplicationEnv, SourceProgram, Term};

use crate::diff::{classify, Verdict};
use crate::generate::{generate_program, GenConfig};
use crate::pipeline::{is_canonical, transform, Level};

/// Configuration of one fuzz campaign.  The same configuration always
/// produces the same case sequence and the same summary.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FuzzConfig {
    pub seed: u64,
    pub cases: u32,
    pub term_depth: u32,
    pub contract_depth: u32,
    pub label_budget: u32,
    pub level: Level,
}

impl FuzzConfig {
    pub fn gen_config(&self) -> GenConfig {
        GenConfig {
            term_depth: self.term_depth,
            contract_depth: self.contract_depth,
            label_budget: self.label_budget,
        }
    }
}

/// How a single case fared.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CaseOutcome {
    /// Outcomes identical (value, blame label and polarity, or both
    /// stuck).
    Strong,
    /// Outcome classes agree; acceptable at the subset level only.
    Weak,
    /// Fuel ran out somewhere; no claim.
    Inconclusive(String),
    /// A property failed; the string names the kind of failure.
    Violation(String),
}

/// Runs the per-case property: normalize, check canonicity of the
/// output, evaluate both sides, classify.
pub fn fuzz_case(
    program: &SourceProgram,
    level: Level,
    env: &ImplicationEnv,
    fuel: u64,
) -> CaseOutcome {
    let transformed = match transform(program, level, false, env) {
        Ok(t) => t,
        Err(e) => return CaseOutcome::Violation(format!("normalization failed; {e}")),
    };
    if !is_canonical(level, &transformed.term, &transformed.store, env) {
        return CaseOutcome::Violation("output not canonical".to_string());
    }
    let config = EvalConfig { fuel };
    let original = run(&program.term, &config);
    let after = run_from(transformed.store.clone(), transformed.term.clone(), &config);
    match classify(level, &original, &after) {
        Verdict::StrongOk => CaseOutcome::Strong,
        Verdict::WeakOk => match level {
            Level::Baseline => {
                CaseOutcome::Violation("weak-only agreement at baseline level".to_string())
            }
            Level::Subset => CaseOutcome::Weak,
        },
        Verdict::Violation { detail } => CaseOutcome::Violation(detail),
        Verdict::Inconclusive { reason } => CaseOutcome::Inconclusive(reason),
    }
}

/// The kind prefix of a violation detail (everything before the first
/// `:` or `;`), used to keep shrinking on the original failure.
fn kind_of(detail: &str) -> &str {
    detail
        .split(|c| c == ':' || c == ';')
        .next()
        .unwrap_or(detail)
        .trim()
}

/// All terms obtained from `t` by one local simplification: dropping
/// an assertion, collapsing a conditional or operator to one operand,
/// beta-reducing a value application, or zeroing an integer literal.
fn variants(t: &Term) -> Vec<Term> {
    let mut out = Vec::new();
    match t {
        Term::Assert { subject, .. } => out.push((**subject).clone()),
        Term::If(_, a, b) => {
            out.push((**a).clone());
            out.push((**b).clone());
        }
        Term::Op(_, a, b) => {
            out.push((**a).clone());
            out.push((**b).clone());
        }
        Term::App(f, a) => {
            if let Term::Lam(x, body) = &**f {
                if a.is_value() {
                    out.push(body.substitute(x, a));
                }
            }
        }
        Term::Const(Constant::Int(n)) if *n != 0 => out.push(Term::int(0)),
        _ => {}
    }
    match t {
        Term::Lam(x, b) => {
            for v in variants(b) {
                out.push(Term::lam(x, v));
            }
        }
        Term::App(f, a) => {
            for v in variants(f) {
                out.push(Term::app(v, (**a).clone()));
            }
            for v in variants(a) {
                out.push(Term::app((**f).clone(), v));
            }
        }
        Term::Op(op, a, b) => {
            for v in variants(a) {
                out.push(Term::Op(*op, Box::new(v), b.clone()));
            }
            for v in variants(b) {
                out.push(Term::Op(*op, a.clone(), Box::new(v)));
            }
        }
        Term::If(c, a, b) => {
            for v in variants(c) {
                out.push(Term::If(Box::new(v), a.clone(), b.clone()));
            }
            for v in variants(a) {
                out.push(Term::If(c.clone(), Box::new(v), b.clone()));
            }
            for v in variants(b) {
                out.push(Term::If(c.clone(), a.clone(), Box::new(v)));
            }
        }
        Term::Assert {
            subject,
            blame,
            contract,
        } => {
            for v in variants(subject) {
                out.push(Term::Assert {
                    subject: Box::new(v),
                    blame: blame.clone(),
                    contract: contract.clone(),
                });
            }
        }
        _ => {}
    }
    out
}

/// Greedily shrinks a failing program, keeping only candidates that
/// are still valid source and still fail with the same kind of
/// violation.
pub fn shrink(
    program: &SourceProgram,
    level: Level,
    env: &ImplicationEnv,
    fuel: u64,
    want_kind: &str,
) -> SourceProgram {
    let mut current = program.clone();
    for _ in 0..64 {
        let mut improved = false;
        for candidate in variants(&current.term) {
            let printed = print_term(&candidate);
            let Ok(sp) = parse_source_named(&printed, &current.origin) else {
                continue;
            };
            if let CaseOutcome::Violation(detail) = fuzz_case(&sp, level, env, fuel) {
                if kind_of(&detail) == want_kind {
                    current = sp;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            break;
        }
    }
    current
}

/// One reported failure.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FuzzViolation {
    pub index: u32,
    pub detail: String,
    pub program: String,
    pub shrunk: String,
}

/// Aggregated result of a campaign.  Printing it is deterministic:
/// the same configuration yields byte-identical summaries.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FuzzSummary {
    #[serde(flatten)]
    pub config: FuzzConfig,
    pub strong_ok: u32,
    pub weak_ok: u32,
    pub inconclusive: u32,
    pub violations: Vec<FuzzViolation>,
}

impl FuzzSummary {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            2
        }
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "level={} seed={} cases={} term-depth={} contract-depth={} labels={}\n",
            self.config.level,
            self.config.seed,
            self.config.cases,
            self.config.term_depth,
            self.config.contract_depth,
            self.config.label_budget
        ));
        out.push_str(&format!("strong-ok: {}\n", self.strong_ok));
        out.push_str(&format!("weak-ok: {}\n", self.weak_ok));
        out.push_str(&format!("inconclusive: {}\n", self.inconclusive));
        out.push_str(&format!("violations: {}\n", self.violations.len()));
        for v in &self.violations {
            out.push_str(&format!("violation case {} ({})\n", v.index, v.detail));
            out.push_str(&format!("  program: {}\n", v.program));
            out.push_str(&format!("  shrunk:  {}\n", v.shrunk));
        }
        out.push_str(if self.passed() {
            "result: ok\n"
        } else {
            "result: FAIL\n"
        });
        out
    }
}

/// Runs a whole campaign.
pub fn run_fuzz(config: &FuzzConfig, env: &ImplicationEnv, fuel: u64) -> FuzzSummary {
    let gen_config = config.gen_config();
    let mut summary = FuzzSummary {
        config: config.clone(),
        strong_ok: 0,
        weak_ok: 0,
        inconclusive: 0,
        violations: Vec::new(),
    };
    for index in 0..config.cases {
        let program = generate_program(config.seed, index, &gen_config);
        match fuzz_case(&program, config.level, env, fuel) {
            CaseOutcome::Strong => summary.strong_ok += 1,
            CaseOutcome::Weak => summary.weak_ok += 1,
            CaseOutcome::Inconclusive(_) => summary.inconclusive += 1,
            CaseOutcome::Violation(detail) => {
                let kind = kind_of(&detail).to_string();
                let shrunk = shrink(&program, config.level, env, fuel, &kind);
                summary.violations.push(FuzzViolation {
                    index,
                    detail,
                    program: print_term(&program.term),
                    shrunk: print_term(&shrunk.term),
                });
            }
        }
    }
    summary
}
