//! Shared plumbing for the subcommands: simplification at a chosen
//! level, canonicity checking, and printable summaries of evaluation
//! outcomes.

use std::collections::BTreeMap;
use std::fmt;

use lcon_core::{
    baseline_normalize, count_branches, is_canonical_baseline_with, is_canonical_subset_with,
    optimize, predicate_census, print_term, subset_normalize, ConstraintStore, ImplicationEnv,
    OptimizeError, Outcome, Polarity, SourceProgram, SubsetConfig, Term, TransformConfig,
    TransformError, TransformStep,
};

/// Simplification tier selected on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Baseline,
    Subset,
}

impl Level {
    pub fn name(self) -> &'static str {
        match self {
            Level::Baseline => "baseline",
            Level::Subset => "subset",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Why a simplification did not produce a result.
#[derive(Debug)]
pub enum TransformFailure {
    Baseline(TransformError),
    Subset(OptimizeError),
}

impl fmt::Display for TransformFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformFailure::Baseline(e) => write!(f, "{e}"),
            TransformFailure::Subset(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for TransformFailure {}

/// A simplified program together with the store its evaluation must
/// start from and the statistics the report format exposes.
#[derive(Debug, Clone)]
pub struct Transformed {
    pub store: ConstraintStore,
    pub term: Term,
    pub steps: Vec<TransformStep>,
    pub branches_max: usize,
    pub predicates_before: usize,
    pub predicates_after: usize,
}

impl Transformed {
    pub fn rule_counts(&self) -> BTreeMap<String, u64> {
        let mut counts = BTreeMap::new();
        for s in &self.steps {
            *counts.entry(s.rule.clone()).or_insert(0) += 1;
        }
        counts
    }
}

/// Simplifies `program` at `level`.  At the subset level the full
/// pipeline (subset normalization, fork join, condensation) runs
/// unless `no_join` is set, in which case the canonical observation
/// tree is returned with its forks intact.
pub fn transform(
    program: &SourceProgram,
    level: Level,
    no_join: bool,
    env: &ImplicationEnv,
) -> Result<Transformed, TransformFailure> {
    let predicates_before = predicate_census(&program.term);
    match level {
        Level::Baseline => {
            let (store, term, steps) = baseline_normalize(
                ConstraintStore::new(),
                program.term.clone(),
                env,
                &TransformConfig::default(),
            )
            .map_err(TransformFailure::Baseline)?;
            let predicates_after = predicate_census(&term);
            Ok(Transformed {
                store,
                term,
                steps,
                branches_max: 1,
                predicates_before,
                predicates_after,
            })
        }
        Level::Subset if no_join => {
            let (store, tree, steps) = subset_normalize(
                ConstraintStore::new(),
                program.term.clone(),
                env,
                &SubsetConfig::default(),
            )
            .map_err(|e| TransformFailure::Subset(OptimizeError::Subset(e)))?;
            let branches_max = steps
                .iter()
                .map(|s| count_branches(&s.after))
                .max()
                .unwrap_or(1)
                .max(1);
            let predicates_after = predicate_census(&tree);
            Ok(Transformed {
                store,
                term: tree,
                steps,
                branches_max,
                predicates_before,
                predicates_after,
            })
        }
        Level::Subset => {
            let (store, term, report) =
                optimize(program, env, &SubsetConfig::default()).map_err(TransformFailure::Subset)?;
            Ok(Transformed {
                store,
                term,
                steps: report.steps,
                branches_max: report.branches_max,
                predicates_before: report.predicates_before,
                predicates_after: report.predicates_after,
            })
        }
    }
}

/// Replay-based canonicity check at the given level.
pub fn is_canonical(level: Level, term: &Term, store: &ConstraintStore, env: &ImplicationEnv) -> bool {
    match level {
        Level::Baseline => {
            is_canonical_baseline_with(term, &TransformConfig::default()).is_canonical()
        }
        Level::Subset => {
            is_canonical_subset_with(term, store, env, &SubsetConfig::default()).is_canonical()
        }
    }
}

/// A serializable snapshot of an evaluation outcome.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OutcomeSummary {
    Value { term: String, checks: u64 },
    Blame { label: String, polarity: String, checks: u64 },
    Stuck { term: String, checks: u64 },
    OutOfFuel { checks: u64 },
}

pub fn polarity_symbol(p: Polarity) -> &'static str {
    match p {
        Polarity::Positive => "+",
        Polarity::Negative => "-",
    }
}

impl OutcomeSummary {
    pub fn of(outcome: &Outcome) -> OutcomeSummary {
        match outcome {
            Outcome::Value { value, checks, .. } => OutcomeSummary::Value {
                term: print_term(value),
                checks: *checks,
            },
            Outcome::Blame {
                label,
                polarity,
                checks,
                ..
            } => OutcomeSummary::Blame {
                label: label.clone(),
                polarity: polarity_symbol(*polarity).to_string(),
                checks: *checks,
            },
            Outcome::Stuck { term, checks, .. } => OutcomeSummary::Stuck {
                term: print_term(term),
                checks: *checks,
            },
            Outcome::OutOfFuel { checks, .. } => OutcomeSummary::OutOfFuel { checks: *checks },
        }
    }

    pub fn checks(&self) -> u64 {
        match self {
            OutcomeSummary::Value { checks, .. }
            | OutcomeSummary::Blame { checks, .. }
            | OutcomeSummary::Stuck { checks, .. }
            | OutcomeSummary::OutOfFuel { checks } => *checks,
        }
    }

    /// Exit status of `run`/`count`: 0 value, 2 blame, 3 stuck or out
    /// of fuel.
    pub fn exit_code(&self) -> i32 {
        match self {
            OutcomeSummary::Value { .. } => 0,
            OutcomeSummary::Blame { .. } => 2,
            OutcomeSummary::Stuck { .. } | OutcomeSummary::OutOfFuel { .. } => 3,
        }
    }

    /// One-line human rendering, e.g. `value 6` or `blame #l -`.
    pub fn describe(&self) -> String {
        match self {
            OutcomeSummary::Value { term, .. } => format!("value {term}"),
            OutcomeSummary::Blame { label, polarity, .. } => format!("blame #{label} {polarity}"),
            OutcomeSummary::Stuck { term, .. } => format!("stuck {term}"),
            OutcomeSummary::OutOfFuel { .. } => "out-of-fuel".to_string(),
        }
    }

    /// The outcome class without payload: value / blame / stuck /
    /// out-of-fuel.
    pub fn class(&self) -> &'static str {
        match self {
            OutcomeSummary::Value { .. } => "value",
            OutcomeSummary::Blame { .. } => "blame",
            OutcomeSummary::Stuck { .. } => "stuck",
            OutcomeSummary::OutOfFuel { .. } => "out-of-fuel",
        }
    }
}
