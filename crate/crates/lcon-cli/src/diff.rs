//! Differential oracle: runs a program and its simplified form under
//! equal fuel and classifies the pair of outcomes.
//!
//! Verdicts follow the two preservation regimes:
//!
//! * `strong-ok` — the outcomes are identical: the same value after
//!   unwrapping delayed contracts, or blame on the same label with the
//!   same polarity.  The baseline level demands this.
//! * `weak-ok` — the outcome classes agree (blame iff blame) and the
//!   values agree when both sides produce values.  The subset level
//!   demands this, plus that the simplified side performs no more
//!   predicate checks than the original.
//! * `violation(kind)` — the first divergence found.
//! * `inconclusive` — fuel ran out on either side (or the
//!   transformation exhausted its own budget), so no claim is made.

use lcon_core::{run, run_from, struct_equiv, EvalConfig, ImplicationEnv, Outcome, SourceProgram};

use crate::pipeline::{transform, Level, OutcomeSummary};

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Verdict {
    StrongOk,
    WeakOk,
    Violation { detail: String },
    Inconclusive { reason: String },
}

impl Verdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, Verdict::StrongOk | Verdict::WeakOk)
    }

    /// Exit status of `diff`: 0 for either ok verdict, 2 for a
    /// violation, 4 for inconclusive.
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::StrongOk | Verdict::WeakOk => 0,
            Verdict::Violation { .. } => 2,
            Verdict::Inconclusive { .. } => 4,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Verdict::StrongOk => "strong-ok".to_string(),
            Verdict::WeakOk => "weak-ok".to_string(),
            Verdict::Violation { detail } => format!("violation ({detail})"),
            Verdict::Inconclusive { reason } => format!("inconclusive ({reason})"),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct DiffReport {
    pub program: String,
    pub level: Level,
    pub outcome_original: OutcomeSummary,
    pub outcome_transformed: Option<OutcomeSummary>,
    pub checks_original: u64,
    pub checks_transformed: Option<u64>,
    pub verdict: Verdict,
}

/// Runs the differential oracle on one program.
pub fn diff_program(
    program: &SourceProgram,
    level: Level,
    env: &ImplicationEnv,
    fuel: u64,
) -> DiffReport {
    let config = EvalConfig { fuel };
    let original = run(&program.term, &config);
    let summary_original = OutcomeSummary::of(&original);

    let transformed = match transform(program, level, false, env) {
        Ok(t) => t,
        Err(e) => {
            return DiffReport {
                program: program.origin.clone(),
                level,
                checks_original: summary_original.checks(),
                outcome_original: summary_original,
                outcome_transformed: None,
                checks_transformed: None,
                verdict: Verdict::Inconclusive {
                    reason: format!("transformation exhausted its budget: {e}"),
                },
            }
        }
    };
    let after = run_from(transformed.store.clone(), transformed.term.clone(), &config);
    let summary_after = OutcomeSummary::of(&after);

    let verdict = classify(level, &original, &after);
    DiffReport {
        program: program.origin.clone(),
        level,
        checks_original: summary_original.checks(),
        checks_transformed: Some(summary_after.checks()),
        outcome_original: summary_original,
        outcome_transformed: Some(summary_after),
        verdict,
    }
}

/// Whether two value outcomes denote the same result.  Delayed
/// contract wrappers are stripped first; the remaining comparison is
/// structural equivalence, which sees through relocated assertions on
/// either side (constants must match exactly).
fn values_agree(a: &lcon_core::Term, b: &lcon_core::Term) -> bool {
    struct_equiv(a.unwrap_value(), b.unwrap_value()).is_some()
}

/// Classifies an (original, transformed) outcome pair, including the
/// check-count discipline: simplification must never add checks.
pub fn classify(level: Level, original: &Outcome, transformed: &Outcome) -> Verdict {
    if matches!(original, Outcome::OutOfFuel { .. })
        || matches!(transformed, Outcome::OutOfFuel { .. })
    {
        return Verdict::Inconclusive {
            reason: "out of fuel".to_string(),
        };
    }
    if transformed.checks() > original.checks() {
        return Verdict::Violation {
            detail: format!(
                "checks increased: {} -> {}",
                original.checks(),
                transformed.checks()
            ),
        };
    }
    match (original, transformed) {
        (Outcome::Value { value: v1, .. }, Outcome::Value { value: v2, .. }) => {
            if values_agree(v1, v2) {
                Verdict::StrongOk
            } else {
                Verdict::Violation {
                    detail: format!(
                        "value divergence: {} vs {}",
                        lcon_core::print_term(v1.unwrap_value()),
                        lcon_core::print_term(v2.unwrap_value())
                    ),
                }
            }
        }
        (
            Outcome::Blame {
                label: l1,
                polarity: p1,
                ..
            },
            Outcome::Blame {
                label: l2,
                polarity: p2,
                ..
            },
        ) => {
            if l1 == l2 && p1 == p2 {
                Verdict::StrongOk
            } else {
                match level {
                    Level::Baseline => Verdict::Violation {
                        detail: format!("blame divergence: #{l1} vs #{l2}"),
                    },
                    Level::Subset => Verdict::WeakOk,
                }
            }
        }
        (Outcome::Stuck { .. }, Outcome::Stuck { .. }) => Verdict::StrongOk,
        (a, b) => Verdict::Violation {
            detail: format!(
                "outcome class mismatch: {} vs {}",
                OutcomeSummary::of(a).class(),
                OutcomeSummary::of(b).class()
            ),
        },
    }
}
