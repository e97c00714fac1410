//! Joining parallel observations and condensing duplicate assertions.
//!
//! The subset transformation leaves behind a tree of forked
//! observations, one branch per explored contract alternative.  This
//! module collapses that tree back into a single program:
//!
//! * [`struct_equiv`] decides the structural equivalence `M ≡ N` that
//!   ignores contract assertions and blame terms,
//! * [`ctx_join`] unions two assertion stacks without duplicating
//!   frames,
//! * [`join_step`] / [`join_normalize`] synchronize and dissolve fork
//!   nodes (rules Match, Synchronize/Left, Synchronize/Right, and
//!   Synchronize/Contract),
//! * [`condense_step`] / [`condense_normalize`] remove stacked
//!   duplicate contracts, redirecting their blame variables, and
//! * [`optimize`] runs the whole pipeline: subset-normalize, then
//!   join, then condense.
//!
//! Strategy notes.  Forks are joined innermost-first (leftmost on
//! ties); within a fork, synchronization fixes the leftmost-outermost
//! position where a rule applies, trying Synchronize/Left, then
//! Synchronize/Right, then Synchronize/Contract.  Because
//! Synchronize/Contract requires the two cores below the differing
//! stacks to be syntactically equal, deeper differences resolve
//! before shallower ones as the scan descends past positions where no
//! rule fires yet.  When both branches hold blame at an aligned
//! position, the left branch's blame term is kept; the residual `bot`
//! assertions in the program preserve the violation either way.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::ast::{Contract, Term};
use crate::baseline::TransformStep;
use crate::constraint::{Constraint, ConstraintDef, ConstraintStore};
use crate::subcontract::{contract_alpha_eq, ImplicationEnv};
use crate::subset::{
    children, count_branches, preorder, replace_at, subset_normalize, AssertionContext,
    SubsetConfig, SubsetError,
};
use crate::syntax::{print_term, SourceProgram};

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Failure while joining an observation tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JoinError {
    /// A fork's branches are not structurally equivalent, so no join
    /// rule fires.  This signals a bug in the transformation that
    /// produced the tree.
    Stuck {
        /// Path of the offending fork node.
        path: Vec<usize>,
        /// Printed left branch.
        left: String,
        /// Printed right branch.
        right: String,
    },
    /// Joining failed to converge within the internal step budget.
    StepBudgetExceeded { cap: u64 },
}

impl core::fmt::Display for JoinError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            JoinError::Stuck { path, left, right } => write!(
                f,
                "join stuck at fork {path:?}: branches are not structurally \
                 equivalent: {left} || {right}"
            ),
            JoinError::StepBudgetExceeded { cap } => {
                write!(f, "join exceeded the step budget of {cap} steps")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for JoinError {}

/// Failure anywhere in the optimize pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OptimizeError {
    Subset(SubsetError),
    Join(JoinError),
}

impl core::fmt::Display for OptimizeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            OptimizeError::Subset(e) => write!(f, "{e}"),
            OptimizeError::Join(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for OptimizeError {}

impl From<SubsetError> for OptimizeError {
    fn from(e: SubsetError) -> OptimizeError {
        OptimizeError::Subset(e)
    }
}

impl From<JoinError> for OptimizeError {
    fn from(e: JoinError) -> OptimizeError {
        OptimizeError::Join(e)
    }
}

// ---------------------------------------------------------------------------
// Structural equivalence
// ---------------------------------------------------------------------------

/// Evidence that two terms are structurally equivalent: the aligned
/// positions at which they differ, each difference being either a
/// mismatch of assertion stacks or a blame term facing an arbitrary
/// subterm.  An empty list means the terms are syntactically equal.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StructEquivWitness {
    /// Pairs of (path in left term, path in right term).
    pub differences: Vec<(Vec<usize>, Vec<usize>)>,
}

impl StructEquivWitness {
    pub fn is_empty(&self) -> bool {
        self.differences.is_empty()
    }
}

/// True when the head constructors (including their atoms: variable
/// names, constants, operators, binders) agree, so the terms can only
/// differ inside aligned children.
fn heads_match(a: &Term, b: &Term) -> bool {
    match (a, b) {
        (Term::Const(c1), Term::Const(c2)) => c1 == c2,
        (Term::Var(x), Term::Var(y)) => x == y,
        // Binders are compared literally: both branches of a fork
        // descend from the same program, so names line up.
        (Term::Lam(x, _), Term::Lam(y, _)) => x == y,
        (Term::App(_, _), Term::App(_, _)) => true,
        (Term::Op(o1, _, _), Term::Op(o2, _, _)) => o1 == o2,
        (Term::If(_, _, _), Term::If(_, _, _)) => true,
        (Term::PredEval { var: v1, .. }, Term::PredEval { var: v2, .. }) => v1 == v2,
        (Term::Fork(_, _), Term::Fork(_, _)) => true,
        _ => false,
    }
}

/// Decides `m ≡ n` and returns the positions where the two terms
/// differ by assertion frames or blame terms; `None` when the terms
/// disagree at a position neither relation axiom covers.
pub fn struct_equiv(m: &Term, n: &Term) -> Option<StructEquivWitness> {
    let mut differences = Vec::new();
    let mut pl = Vec::new();
    let mut pr = Vec::new();
    if equiv_rec(m, n, &mut pl, &mut pr, &mut differences) {
        Some(StructEquivWitness { differences })
    } else {
        None
    }
}

fn equiv_rec(
    m: &Term,
    n: &Term,
    pl: &mut Vec<usize>,
    pr: &mut Vec<usize>,
    out: &mut Vec<(Vec<usize>, Vec<usize>)>,
) -> bool {
    if m == n {
        return true;
    }
    let (al, sl) = AssertionContext::peel(m);
    let (ar, sr) = AssertionContext::peel(n);
    if matches!(sl, Term::Blame(_, _)) || matches!(sr, Term::Blame(_, _)) {
        // Blame axiom: a blame term is equivalent to anything.
        out.push((pl.clone(), pr.clone()));
        return true;
    }
    if al.frames != ar.frames {
        out.push((pl.clone(), pr.clone()));
    }
    if sl == sr {
        return true;
    }
    if !heads_match(sl, sr) {
        return false;
    }
    let cl = children(sl);
    let cr = children(sr);
    if cl.len() != cr.len() {
        return false;
    }
    for i in 0..cl.len() {
        let l0 = pl.len();
        let r0 = pr.len();
        // Paths run through the (transparent) assertion subjects.
        pl.extend(core::iter::repeat(0).take(al.len()));
        pl.push(i);
        pr.extend(core::iter::repeat(0).take(ar.len()));
        pr.push(i);
        let ok = equiv_rec(cl[i], cr[i], pl, pr, out);
        pl.truncate(l0);
        pr.truncate(r0);
        if !ok {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Assertion-context union
// ---------------------------------------------------------------------------

/// True when `a` contains a frame with the same blame reference and an
/// alpha-equal contract.
fn ctx_contains(a: &AssertionContext, frame: &(crate::ast::BlameRef, Contract)) -> bool {
    a.frames
        .iter()
        .any(|(b, c)| *b == frame.0 && contract_alpha_eq(c, &frame.1))
}

/// Frames of `b` that are not already contained in `a`, order
/// preserved.
fn ctx_minus(b: &AssertionContext, a: &AssertionContext) -> AssertionContext {
    AssertionContext {
        frames: b
            .frames
            .iter()
            .filter(|f| !ctx_contains(a, f))
            .cloned()
            .collect(),
    }
}

/// Union of two assertion contexts: `a` keeps all its frames and the
/// frames of `b` not already contained in `a` move into the hole
/// (that is, innermost).  No frame is duplicated, so the result has
/// at most `|a| + |b|` frames.
pub fn ctx_join(a: &AssertionContext, b: &AssertionContext) -> AssertionContext {
    let mut frames = ctx_minus(b, a).frames;
    frames.extend(a.frames.iter().cloned());
    AssertionContext { frames }
}

// ---------------------------------------------------------------------------
// Synchronizing one fork
// ---------------------------------------------------------------------------

enum SyncOutcome {
    /// No difference below this aligned pair.
    Equal,
    /// One synchronization rule fired; rewritten left and right
    /// subtrees plus the rule name.
    Step(Term, Term, &'static str),
    /// The pair is not structurally equivalent.
    Stuck,
}

/// Applies the single leftmost-outermost synchronization step to an
/// aligned pair of fork branches.
fn sync_rec(m: &Term, n: &Term) -> SyncOutcome {
    if m == n {
        return SyncOutcome::Equal;
    }
    let (al, sl) = AssertionContext::peel(m);
    let (ar, sr) = AssertionContext::peel(n);
    if sl == sr {
        // The cores agree (this includes two copies of the same blame
        // term), so the difference lies in the assertion stacks; both
        // sides take their union (right frames stay outermost).
        let joined = ctx_join(&ar, &al);
        return SyncOutcome::Step(
            joined.wrap(sl.clone()),
            joined.wrap(sr.clone()),
            "Join/Synchronize/Contract",
        );
    }
    let left_blame = matches!(sl, Term::Blame(_, _));
    let right_blame = matches!(sr, Term::Blame(_, _));
    if right_blame {
        // Synchronize/Left: the right alternative died; its blame
        // core is replaced by the left core (which is the left blame
        // term when both alternatives died).
        return SyncOutcome::Step(
            m.clone(),
            ar.wrap(sl.clone()),
            "Join/Synchronize/Left",
        );
    }
    if left_blame {
        return SyncOutcome::Step(
            al.wrap(sr.clone()),
            n.clone(),
            "Join/Synchronize/Right",
        );
    }
    if !heads_match(sl, sr) {
        return SyncOutcome::Stuck;
    }
    let cl = children(sl);
    let cr = children(sr);
    if cl.len() != cr.len() {
        return SyncOutcome::Stuck;
    }
    for i in 0..cl.len() {
        match sync_rec(cl[i], cr[i]) {
            SyncOutcome::Equal => continue,
            SyncOutcome::Step(l2, r2, rule) => {
                let new_sl = replace_at(sl, &[i], &mut |_| l2.clone());
                let new_sr = replace_at(sr, &[i], &mut |_| r2.clone());
                return SyncOutcome::Step(al.wrap(new_sl), ar.wrap(new_sr), rule);
            }
            SyncOutcome::Stuck => return SyncOutcome::Stuck,
        }
    }
    // Matching heads with equal children imply equal cores, which was
    // ruled out above; treat defensively as stuck.
    SyncOutcome::Stuck
}

fn has_fork(t: &Term) -> bool {
    preorder(t)
        .iter()
        .any(|(_, n)| matches!(n, Term::Fork(_, _)))
}

// ---------------------------------------------------------------------------
// Join steps
// ---------------------------------------------------------------------------

/// Applies one join rule to the innermost (leftmost on ties) fork of
/// the observation tree.  Returns `None` when no fork remains.
pub fn join_step(t: &Term) -> Result<Option<(Term, TransformStep)>, JoinError> {
    for (path, node) in preorder(t) {
        let Term::Fork(l, r) = node else { continue };
        if has_fork(l) || has_fork(r) {
            // Inner forks join first; this fork's turn comes later.
            continue;
        }
        if l == r {
            let after = replace_at(t, &path, &mut |_| (**l).clone());
            let step = TransformStep {
                rule: "Join/Match".to_string(),
                path,
                before: t.clone(),
                after: after.clone(),
                store_delta: Vec::new(),
            };
            return Ok(Some((after, step)));
        }
        return match sync_rec(l, r) {
            SyncOutcome::Step(l2, r2, rule) => {
                let after = replace_at(t, &path, &mut |_| {
                    Term::Fork(Box::new(l2.clone()), Box::new(r2.clone()))
                });
                let step = TransformStep {
                    rule: rule.to_string(),
                    path,
                    before: t.clone(),
                    after: after.clone(),
                    store_delta: Vec::new(),
                };
                Ok(Some((after, step)))
            }
            SyncOutcome::Equal | SyncOutcome::Stuck => Err(JoinError::Stuck {
                path,
                left: print_term(l),
                right: print_term(r),
            }),
        };
    }
    Ok(None)
}

/// Joins every fork in the tree, innermost-first.
pub fn join_normalize(t: &Term) -> Result<(Term, Vec<TransformStep>), JoinError> {
    const CAP: u64 = 100_000;
    let mut cur = t.clone();
    let mut steps = Vec::new();
    for _ in 0..CAP {
        match join_step(&cur)? {
            Some((next, step)) => {
                cur = next;
                steps.push(step);
            }
            None => return Ok((cur, steps)),
        }
    }
    Err(JoinError::StepBudgetExceeded { cap: CAP })
}

// ---------------------------------------------------------------------------
// Condense
// ---------------------------------------------------------------------------

/// Removes one duplicate assertion: an assert whose subject already
/// carries an alpha-equal contract somewhere in its assertion stack
/// is dropped, and its blame variable is redirected to the inner
/// assertion's variable.
pub fn condense_step(
    store: &ConstraintStore,
    t: &Term,
) -> Option<(ConstraintStore, Term, TransformStep)> {
    for (path, node) in preorder(t) {
        let Term::Assert {
            subject,
            blame,
            contract,
        } = node
        else {
            continue;
        };
        let (stack, _) = AssertionContext::peel(subject);
        // Scan the frames below the outer assert from the nearest
        // inward; the partner's blame must be a variable so the
        // indirection constraint has a target.
        let partner = stack.frames.iter().rev().find_map(|(b, c)| match b {
            crate::ast::BlameRef::Var(v) if contract_alpha_eq(c, contract) => Some(*v),
            _ => None,
        })?;
        let mut store2 = store.clone();
        store2.append(blame.clone(), ConstraintDef::Indirect(partner));
        let delta = vec![Constraint {
            lhs: blame.clone(),
            def: ConstraintDef::Indirect(partner),
            from_fork: false,
        }];
        let after = replace_at(t, &path, &mut |_| (**subject).clone());
        let step = TransformStep {
            rule: "Condense".to_string(),
            path,
            before: t.clone(),
            after: after.clone(),
            store_delta: delta,
        };
        return Some((store2, after, step));
    }
    None
}

/// Condenses duplicate assertions to a fixpoint.  Terminates because
/// every step removes one assert node.
pub fn condense_normalize(
    store: ConstraintStore,
    t: Term,
) -> (ConstraintStore, Term, Vec<TransformStep>) {
    let mut store = store;
    let mut cur = t;
    let mut steps = Vec::new();
    while let Some((s2, next, step)) = condense_step(&store, &cur) {
        store = s2;
        cur = next;
        steps.push(step);
    }
    (store, cur, steps)
}

// ---------------------------------------------------------------------------
// The optimize pipeline
// ---------------------------------------------------------------------------

/// Metrics gathered across the optimize pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptimizeReport {
    /// Every transformation step in order (subset, join, condense).
    pub steps: Vec<TransformStep>,
    /// How often each rule fired.
    pub rule_counts: BTreeMap<String, u64>,
    /// Largest number of parallel branches at any point.
    pub branches_max: usize,
    /// Static predicate census of the input term.
    pub predicates_before: usize,
    /// Static predicate census of the final term.
    pub predicates_after: usize,
}

/// Counts the flat predicates (raw, named, and dependent leaves)
/// inside every contract assertion of the term.
pub fn predicate_census(t: &Term) -> usize {
    preorder(t)
        .iter()
        .map(|(_, node)| match node {
            Term::Assert { contract, .. } => contract_predicates(contract),
            Term::PredEval { .. } => 1,
            _ => 0,
        })
        .sum()
}

fn contract_predicates(c: &Contract) -> usize {
    match c {
        Contract::Top | Contract::Bot => 0,
        Contract::Flat(_) | Contract::Named(_) => 1,
        Contract::Dep(_, body) => contract_predicates(body),
        Contract::Func(a, b) | Contract::And(a, b) | Contract::Or(a, b) => {
            contract_predicates(a) + contract_predicates(b)
        }
    }
}

/// Maximum number of subset/join/condense rounds [`optimize`] will
/// attempt before giving up.  Each productive round strictly shrinks
/// the term, so this bound is only a safety net.
const MAX_OPTIMIZE_ROUNDS: u64 = 64;

/// Runs the full pipeline on a source program: subset-normalize to a
/// canonical observation tree, join the forks, and condense duplicate
/// assertions.  Joining two branches can stack assertions that form a
/// fresh merge redex, so the three passes are iterated until none of
/// them fires.  The result is a fork-free canonical term together
/// with the constraint store that evaluation of the transformed
/// program must start from.
pub fn optimize(
    program: &SourceProgram,
    env: &ImplicationEnv,
    cfg: &SubsetConfig,
) -> Result<(ConstraintStore, Term, OptimizeReport), OptimizeError> {
    let predicates_before = predicate_census(&program.term);
    let mut store = ConstraintStore::new();
    let mut term = program.term.clone();
    let mut steps: Vec<TransformStep> = Vec::new();
    let mut branches_max = 1usize;
    let mut rounds = 0u64;
    loop {
        rounds += 1;
        if rounds > MAX_OPTIMIZE_ROUNDS {
            return Err(OptimizeError::Subset(SubsetError::StepBudgetExceeded {
                cap: cfg.step_cap,
            }));
        }
        let (next_store, tree, subset_steps) = subset_normalize(store, term, env, cfg)?;
        branches_max = branches_max.max(
            subset_steps
                .iter()
                .map(|s| count_branches(&s.after))
                .max()
                .unwrap_or(1),
        );
        let (joined, join_steps) = join_normalize(&tree)?;
        let mut next_store = next_store;
        // The tree is fork-free from here on; failing checks under a
        // joined union must not be zapped to blame any more.
        next_store.clear_fork_licenses();
        let (condensed_store, condensed, condense_steps) = condense_normalize(next_store, joined);
        let fired =
            !subset_steps.is_empty() || !join_steps.is_empty() || !condense_steps.is_empty();
        steps.extend(subset_steps);
        steps.extend(join_steps);
        steps.extend(condense_steps);
        store = condensed_store;
        term = condensed;
        if !fired {
            break;
        }
    }
    let mut rule_counts: BTreeMap<String, u64> = BTreeMap::new();
    for s in &steps {
        *rule_counts.entry(s.rule.clone()).or_insert(0) += 1;
    }
    let predicates_after = predicate_census(&term);
    let report = OptimizeReport {
        steps,
        rule_counts,
        branches_max,
        predicates_before,
        predicates_after,
    };
    Ok((store, term, report))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{BlameRef, NamedPred, Polarity};
    use crate::subset::is_canonical_subset_with;
    use crate::syntax::{parse_source, parse_term};

    fn t(src: &str) -> Term {
        parse_term(src).expect("parse")
    }

    fn frame(v: u32, c: Contract) -> (BlameRef, Contract) {
        (BlameRef::Var(v), c)
    }

    fn number() -> Contract {
        Contract::Named(NamedPred::Number)
    }

    fn positive() -> Contract {
        Contract::Named(NamedPred::Positive)
    }

    // ------------------------------------------------------------------
    // Structural equivalence
    // ------------------------------------------------------------------

    #[test]
    fn struct_equiv_spec_examples() {
        let m = t("(lam x (+ x 1))");
        // Reflexivity gives an empty witness.
        assert_eq!(
            struct_equiv(&m, &m),
            Some(StructEquivWitness::default())
        );
        // Assertions are transparent.
        let wrapped = t("(assert (lam x (+ x 1)) @1 Number?)");
        let w = struct_equiv(&wrapped, &m).expect("equivalent");
        assert_eq!(w.differences, vec![(vec![], vec![])]);
        // Any term is equivalent to a blame term.
        let blame = Term::Blame("l".to_string(), Polarity::Positive);
        assert!(struct_equiv(&m, &blame).is_some());
        // A non-assertion difference breaks the relation.
        assert_eq!(struct_equiv(&t("(lam x x)"), &t("(lam x 1)")), None);
    }

    #[test]
    fn struct_equiv_localizes_inner_differences() {
        let m = t("((lam x x) (assert 5 @1 Number?))");
        let n = t("((lam x x) 5)");
        let w = struct_equiv(&m, &n).expect("equivalent");
        assert_eq!(w.differences, vec![(vec![1], vec![1])]);
    }

    #[test]
    fn struct_equiv_is_symmetric_and_transitive_on_samples() {
        let samples = [
            t("(lam x (+ x 1))"),
            t("(assert (lam x (+ x 1)) @1 Number?)"),
            t("(assert (assert (lam x (+ x 1)) @2 Positive?) @1 Number?)"),
            Term::Blame("l".to_string(), Polarity::Negative),
        ];
        for a in &samples {
            for b in &samples {
                assert_eq!(
                    struct_equiv(a, b).is_some(),
                    struct_equiv(b, a).is_some()
                );
                for c in &samples {
                    if struct_equiv(a, b).is_some() && struct_equiv(b, c).is_some() {
                        assert!(struct_equiv(a, c).is_some());
                    }
                }
            }
        }
    }

    // ------------------------------------------------------------------
    // Context union
    // ------------------------------------------------------------------

    #[test]
    fn ctx_join_spec_examples() {
        let c1 = frame(1, number());
        let c2 = frame(2, positive());
        // a = one frame C1; b = C1 outer with C2 in its hole.
        let a = AssertionContext {
            frames: vec![c1.clone()],
        };
        let b = AssertionContext {
            frames: vec![c2.clone(), c1.clone()],
        };
        // Shared C1 is not duplicated: the union is b itself.
        assert_eq!(ctx_join(&a, &b), b);
        // Empty left context: the union is the right context.
        let empty = AssertionContext::empty();
        assert_eq!(ctx_join(&empty, &b), b);
        // Full entailment: joining a context with itself changes
        // nothing.
        assert_eq!(ctx_join(&b, &b), b);
        // Size bound.
        let disjoint = AssertionContext {
            frames: vec![frame(3, positive())],
        };
        let joined = ctx_join(&a, &disjoint);
        assert!(joined.frames.len() <= a.frames.len() + disjoint.frames.len());
        assert_eq!(joined.frames, vec![frame(3, positive()), c1.clone()]);
    }

    #[test]
    fn ctx_join_requires_matching_blame_variable() {
        // Same contract under different blame variables counts as a
        // different frame and is kept.
        let a = AssertionContext {
            frames: vec![frame(1, number())],
        };
        let b = AssertionContext {
            frames: vec![frame(2, number())],
        };
        let joined = ctx_join(&a, &b);
        assert_eq!(joined.frames, vec![frame(2, number()), frame(1, number())]);
    }

    // ------------------------------------------------------------------
    // Join steps
    // ------------------------------------------------------------------

    fn fork(l: Term, r: Term) -> Term {
        Term::Fork(Box::new(l), Box::new(r))
    }

    #[test]
    fn join_match_dissolves_identical_fork() {
        let m = t("(assert f @1 Number?)");
        let tree = fork(m.clone(), m.clone());
        let (after, step) = join_step(&tree).expect("no stuck").expect("steps");
        assert_eq!(step.rule, "Join/Match");
        assert_eq!(after, m);
        assert!(join_step(&after).expect("no stuck").is_none());
    }

    #[test]
    fn join_sync_left_copies_surviving_core() {
        // The right alternative died: its blame core takes the left
        // branch's subterm while its own assertion stack stays.
        let l = t("(assert f @1 Number?)");
        let r = t("(assert (blame #l +) @2 Positive?)");
        let tree = fork(l.clone(), r);
        let (after, step) = join_step(&tree).expect("no stuck").expect("steps");
        assert_eq!(step.rule, "Join/Synchronize/Left");
        assert_eq!(
            print_term(&after),
            "(fork (assert f @1 Number?) (assert f @2 Positive?))"
        );
        // The stacks then union (right frames outermost) and the fork
        // dissolves.
        let (joined, steps) = join_normalize(&tree).expect("joins");
        assert_eq!(
            steps.iter().map(|s| s.rule.as_str()).collect::<Vec<_>>(),
            [
                "Join/Synchronize/Left",
                "Join/Synchronize/Contract",
                "Join/Match"
            ]
        );
        assert_eq!(
            print_term(&joined),
            "(assert (assert f @1 Number?) @2 Positive?)"
        );
    }

    #[test]
    fn join_sync_right_mirrors_for_left_blame() {
        let l = t("(assert (blame #l -) @1 Number?)");
        let r = t("(assert f @2 Positive?)");
        let tree = fork(l, r);
        let (_, step) = join_step(&tree).expect("no stuck").expect("steps");
        assert_eq!(step.rule, "Join/Synchronize/Right");
        let (joined, _) = join_normalize(&tree).expect("joins");
        // Same final stack arrangement as the mirrored case: the
        // right branch's frames end up outermost.
        assert_eq!(
            print_term(&joined),
            "(assert (assert f @1 Number?) @2 Positive?)"
        );
    }

    #[test]
    fn join_sync_contract_unions_differing_stacks() {
        let l = t("(assert f @1 Number?)");
        let r = t("(assert f @2 Positive?)");
        let (joined, steps) = join_normalize(&fork(l, r)).expect("joins");
        assert_eq!(
            steps.iter().map(|s| s.rule.as_str()).collect::<Vec<_>>(),
            ["Join/Synchronize/Contract", "Join/Match"]
        );
        assert_eq!(
            print_term(&joined),
            "(assert (assert f @1 Number?) @2 Positive?)"
        );
    }

    #[test]
    fn join_both_blame_keeps_left() {
        let l = Term::Blame("a".to_string(), Polarity::Positive);
        let r = Term::Blame("b".to_string(), Polarity::Negative);
        let (joined, steps) = join_normalize(&fork(l.clone(), r)).expect("joins");
        assert_eq!(joined, l);
        assert_eq!(steps[0].rule, "Join/Synchronize/Left");
    }

    #[test]
    fn join_stuck_reports_diagnostic() {
        let err = join_normalize(&fork(t("(lam x x)"), t("(lam x 1)")))
            .expect_err("not equivalent");
        let JoinError::Stuck { path, left, right } = err else {
            panic!("expected stuck, got {err:?}");
        };
        assert_eq!(path, Vec::<usize>::new());
        assert_eq!(left, "(lam x x)");
        assert_eq!(right, "(lam x 1)");
    }

    #[test]
    fn join_handles_nested_forks_innermost_first() {
        let five = t("5");
        let tree = fork(fork(five.clone(), five.clone()), five.clone());
        let (first, step) = join_step(&tree).expect("no stuck").expect("steps");
        assert_eq!(step.path, vec![0]);
        let (joined, steps) = join_normalize(&first).expect("joins");
        assert_eq!(joined, five);
        assert_eq!(steps.len(), 1);
    }

    // ------------------------------------------------------------------
    // Condense
    // ------------------------------------------------------------------

    #[test]
    fn condense_collapses_duplicate_frames() {
        let store = {
            let mut s = ConstraintStore::new();
            s.reserve_through(2);
            s
        };
        let term = t("(assert (assert f @1 Number?) @2 Number?)");
        let (store2, after, step) = condense_step(&store, &term).expect("condenses");
        assert_eq!(step.rule, "Condense");
        assert_eq!(print_term(&after), "(assert f @1 Number?)");
        let last = store2.constraints().last().expect("constraint");
        assert_eq!(last.lhs, BlameRef::Var(2));
        assert!(matches!(last.def, ConstraintDef::Indirect(1)));
        // Nothing further to condense.
        assert!(condense_step(&store2, &after).is_none());
    }

    #[test]
    fn condense_ignores_distinct_contracts() {
        let store = ConstraintStore::new();
        let term = t("(assert (assert f @1 Number?) @2 Positive?)");
        assert!(condense_step(&store, &term).is_none());
    }

    #[test]
    fn condense_reaches_through_intervening_frames() {
        let store = {
            let mut s = ConstraintStore::new();
            s.reserve_through(3);
            s
        };
        let term =
            t("(assert (assert (assert f @1 Number?) @3 Positive?) @2 Number?)");
        let (store2, after, step) = condense_step(&store, &term).expect("condenses");
        assert_eq!(step.rule, "Condense");
        assert_eq!(
            print_term(&after),
            "(assert (assert f @1 Number?) @3 Positive?)"
        );
        let last = store2.constraints().last().expect("constraint");
        assert_eq!(last.lhs, BlameRef::Var(2));
        assert!(matches!(last.def, ConstraintDef::Indirect(1)));
    }

    // ------------------------------------------------------------------
    // The pipeline
    // ------------------------------------------------------------------

    #[test]
    fn optimize_addone1_reaches_single_merged_contract() {
        let program = parse_source(
            "((lam plus (lam z ((plus 1) z))) \
             (assert (lam x (lam y (+ x y))) #plus \
             (-> Number? (-> Number? Number?))))",
        )
        .expect("parse");
        let env = ImplicationEnv::standard();
        let cfg = SubsetConfig::default();
        let (store, term, report) = optimize(&program, &env, &cfg).expect("optimizes");
        assert_eq!(
            print_term(&term),
            "(assert ((lam plus (lam z ((plus 1) z))) (lam x (lam y (+ x y)))) \
             @11 (-> Number? Number?))"
        );
        assert_eq!(count_branches(&term), 1);
        assert!(!has_fork(&term));
        assert_eq!(report.branches_max, 1);
        assert_eq!(report.predicates_before, 3);
        assert_eq!(report.predicates_after, 2);
        assert_eq!(report.rule_counts.get("Merge"), Some(&1));
        assert!(report.rule_counts.keys().all(|r| !r.starts_with("Join/")));
        let verdict = is_canonical_subset_with(&term, &store, &env, &cfg);
        assert!(verdict.is_canonical(), "got {verdict:?}");
    }

    #[test]
    fn optimize_addone2_joins_branches_into_stacked_contracts() {
        let program = parse_source(
            "((lam plus (lam z ((plus 1) z))) \
             (assert (lam x (lam y (+ x y))) #plus \
             (cap (-> Number? (-> Number? Number?)) \
                  (-> String? (-> String? String?)))))",
        )
        .expect("parse");
        let env = ImplicationEnv::standard();
        let cfg = SubsetConfig::default();
        let (store, term, report) = optimize(&program, &env, &cfg).expect("optimizes");
        assert!(!has_fork(&term));
        // The joined program keeps the merged number contract innermost
        // and the residual impossible half outermost.
        assert_eq!(
            print_term(&term),
            "(assert (assert ((lam plus (lam z ((plus 1) z))) \
             (lam x (lam y (+ x y)))) @13 (-> Number? Number?)) @19 (-> top bot))"
        );
        assert_eq!(report.branches_max, 2);
        assert_eq!(report.predicates_before, 6);
        assert_eq!(report.predicates_after, 2);
        assert!(report.rule_counts.get("Join/Match").is_some());
        assert!(report.rule_counts.get("Join/Synchronize/Left").is_some());
        assert!(report.rule_counts.get("Join/Synchronize/Contract").is_some());
        let verdict = is_canonical_subset_with(&term, &store, &env, &cfg);
        assert!(verdict.is_canonical(), "got {verdict:?}");
    }

    #[test]
    fn optimize_contract_free_program_is_identity() {
        let program = parse_source("(+ 1 2)").expect("parse");
        let env = ImplicationEnv::standard();
        let cfg = SubsetConfig::default();
        let (store, term, report) = optimize(&program, &env, &cfg).expect("optimizes");
        assert_eq!(term, t("(+ 1 2)"));
        assert!(store.constraints().is_empty());
        assert!(report.steps.is_empty());
        assert_eq!(report.predicates_before, 0);
        assert_eq!(report.predicates_after, 0);
    }

    #[test]
    fn predicate_census_counts_contract_leaves() {
        assert_eq!(
            predicate_census(&t(
                "(assert f @1 (cap (-> Number? (-> Number? Number?)) \
                 (-> String? (-> String? String?))))"
            )),
            6
        );
        assert_eq!(predicate_census(&t("(assert f @1 (-> top bot))")), 0);
        assert_eq!(
            predicate_census(&t(
                "(assert f @1 (dep (lam y (flat (lam r (> r y))))))"
            )),
            1
        );
        assert_eq!(predicate_census(&t("(+ 1 2)")), 0);
    }
}
