//! The subset transformation `⇝_S`: a fork-based refinement of the
//! baseline transformation that splits union and delayed-intersection
//! contracts into separate observation branches, lifts and lowers
//! contracts across lambda abstractions, prunes subsumed contracts,
//! merges split function contracts, and zaps statically failing
//! contracts to blame terms.
//!
//! Because each fork branch observes one alternative of a union (or
//! one member of an intersection) in isolation, the rules may commit
//! to decisions that would be unsound in the presence of the other
//! alternative; the fork constraints recorded in the store keep blame
//! assignment faithful. The transformation is weakly blame-preserving:
//! a program blames after transformation iff it blames before, and the
//! number of run-time predicate checks never increases.
//!
//! A transformed program is an *observation tree*: a binary tree of
//! `fork` nodes whose leaves (branches) are fork-free terms sharing
//! one constraint store. The companion `join` module folds the tree
//! back into a single program.
//!
//! # Strategy
//!
//! Steps are deterministic. Branches step leftmost-first (a fork's
//! right branch only steps once the left branch is canonical, matching
//! the `fork(T, 𝒯)` trace context). Within a branch, rules are tried
//! in priority tiers, each tier scanning pre-order:
//!
//! 1. `Blame`, `Blame/If/True`, `Blame/If/False`, `Blame/Global` —
//!    zap a statically failing contract to a blame term;
//! 2. `Subset/Left`, `Subset/Right` — prune a subsumed contract from
//!    an assertion stack;
//! 3. `Fork/Union`, `Fork/Intersection` — split a branch;
//! 4. `Merge` — recombine complementary halves of a function contract;
//! 5. `Lift` — turn an immediate contract on the function's own
//!    parameter into a domain contract;
//! 6. the baseline rules, minus the four replaced here (Unfold/Union,
//!    Unfold/D-Intersection, Push/If, Lower);
//! 7. `Push/If` — hoist a common assertion frame out of a conditional;
//! 8. `Lower` — turn a contract on a function body into a range
//!    contract.
//!
//! # Canonical forms
//!
//! The canonical terms extend the baseline grammar: values may carry
//! incomparable assertion stacks (no pair related by the naive
//! subcontracting preorder, no mergeable function-contract pair),
//! lambda bodies contain no liftable contract on their own binder, and
//! `assert blame♭ ι ⊥` survives as the residue of a zapped branch.
//! Whether a `⊥` assertion is zappable depends on the constraint
//! store (its blame term must resolve, and the violation must provably
//! propagate to the root label), so canonicity is checked relative to
//! a store; [`is_canonical_subset_with`] is the exact complement of
//! [`subset_step`], and [`is_canonical_subset`] checks against an
//! empty store, treating the blame machinery conservatively.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::ast::{BlameRef, Contract, Term};
use crate::baseline::{
    self, TransformStep, DEFAULT_STEP_CAP, DEFAULT_VERIFY_FUEL,
};
use crate::constraint::{ConstraintDef, ConstraintStore};
use crate::subcontract::{ImplicationEnv, Subcontracting};
use crate::syntax::normalize_contracts;

/// A term that may contain `fork` nodes along its top spine, sharing
/// one constraint store across branches.
pub type ObservationTree = Term;

/// Default limit on the number of fork branches.
pub const DEFAULT_MAX_BRANCHES: usize = 64;

/// Tuning knobs for the subset transformation.
#[derive(Debug, Clone)]
pub struct SubsetConfig {
    /// Fuel for transformation-time predicate evaluation.
    pub verify_fuel: u64,
    /// Upper bound on normalization steps.
    pub step_cap: u64,
    /// Upper bound on fork branches; exceeded by contract nests that
    /// split combinatorially.
    pub max_branches: usize,
}

impl Default for SubsetConfig {
    fn default() -> SubsetConfig {
        SubsetConfig {
            verify_fuel: DEFAULT_VERIFY_FUEL,
            step_cap: DEFAULT_STEP_CAP,
            max_branches: DEFAULT_MAX_BRANCHES,
        }
    }
}

/// Errors from driving the subset transformation to canonical form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubsetError {
    /// The step budget was exhausted without reaching canonical form.
    StepBudgetExceeded { cap: u64 },
    /// Forking exceeded the branch limit.
    BranchLimitExceeded { limit: usize },
}

impl core::fmt::Display for SubsetError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SubsetError::StepBudgetExceeded { cap } => {
                write!(f, "subset transformation exceeded the step budget of {cap}")
            }
            SubsetError::BranchLimitExceeded { limit } => {
                write!(f, "subset transformation exceeded the fork branch limit of {limit}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SubsetError {}

/// Verdict of the canonical-form check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubsetCanonicity {
    Canonical,
    Transformable { rule: String, path: Vec<usize> },
}

impl SubsetCanonicity {
    pub fn is_canonical(&self) -> bool {
        matches!(self, SubsetCanonicity::Canonical)
    }
}

// ---------------------------------------------------------------------------
// Assertion contexts
// ---------------------------------------------------------------------------

/// An assertion stack `𝒜 ::= □ | assert 𝒜 ι C`: the nest of assertion
/// wrappers around a core term, as a list of `(blame, contract)`
/// frames ordered innermost-first (`frames[0]` is closest to the
/// core).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssertionContext {
    pub frames: Vec<(BlameRef, Contract)>,
}

impl AssertionContext {
    pub fn empty() -> AssertionContext {
        AssertionContext { frames: Vec::new() }
    }

    /// Splits a term into its assertion stack and the core below it.
    pub fn peel(t: &Term) -> (AssertionContext, &Term) {
        let mut frames = Vec::new();
        let mut cur = t;
        while let Term::Assert {
            subject,
            blame,
            contract,
        } = cur
        {
            frames.push((blame.clone(), contract.clone()));
            cur = subject;
        }
        // Collected outermost-first; store innermost-first.
        frames.reverse();
        (AssertionContext { frames }, cur)
    }

    /// Rebuilds the stack around a core term.
    pub fn wrap(&self, core: Term) -> Term {
        let mut cur = core;
        for (blame, contract) in &self.frames {
            cur = Term::Assert {
                subject: Box::new(cur),
                blame: blame.clone(),
                contract: contract.clone(),
            };
        }
        cur
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Path utilities
// ---------------------------------------------------------------------------

/// The children of a node, in the pre-order used throughout the
/// transformations: Lam [body]; App [fun, arg]; Op [left, right];
/// If [cond, then, else]; Assert [subject]; PredEval [value, pred];
/// Fork [left, right].
pub(crate) fn children(t: &Term) -> Vec<&Term> {
    match t {
        Term::Const(_) | Term::Var(_) | Term::Blame(_, _) => vec![],
        Term::Lam(_, b) => vec![&**b],
        Term::App(f, a) => vec![&**f, &**a],
        Term::Op(_, l, r) => vec![&**l, &**r],
        Term::If(c, a, b) => vec![&**c, &**a, &**b],
        Term::Assert { subject, .. } => vec![&**subject],
        Term::PredEval { value, pred, .. } => vec![&**value, &**pred],
        Term::Fork(l, r) => vec![&**l, &**r],
    }
}

/// The subterm at a child-index path, if the path is valid.
pub fn subterm_at<'t>(t: &'t Term, path: &[usize]) -> Option<&'t Term> {
    let mut cur = t;
    for &i in path {
        cur = *children(cur).get(i)?;
    }
    Some(cur)
}

/// Rebuilds `t` with the subterm at `path` replaced by `make(old)`.
pub(crate) fn replace_at(t: &Term, path: &[usize], make: &mut dyn FnMut(&Term) -> Term) -> Term {
    if path.is_empty() {
        return make(t);
    }
    let i = path[0];
    let rest = &path[1..];
    match t {
        Term::Lam(x, b) if i == 0 => Term::lam(x, replace_at(b, rest, make)),
        Term::App(f, a) if i == 0 => Term::app(replace_at(f, rest, make), (**a).clone()),
        Term::App(f, a) if i == 1 => Term::app((**f).clone(), replace_at(a, rest, make)),
        Term::Op(op, l, r) if i == 0 => Term::op(*op, replace_at(l, rest, make), (**r).clone()),
        Term::Op(op, l, r) if i == 1 => Term::op(*op, (**l).clone(), replace_at(r, rest, make)),
        Term::If(c, a, b) if i == 0 => {
            Term::if_(replace_at(c, rest, make), (**a).clone(), (**b).clone())
        }
        Term::If(c, a, b) if i == 1 => {
            Term::if_((**c).clone(), replace_at(a, rest, make), (**b).clone())
        }
        Term::If(c, a, b) if i == 2 => {
            Term::if_((**c).clone(), (**a).clone(), replace_at(b, rest, make))
        }
        Term::Assert {
            subject,
            blame,
            contract,
        } if i == 0 => Term::Assert {
            subject: Box::new(replace_at(subject, rest, make)),
            blame: blame.clone(),
            contract: contract.clone(),
        },
        Term::PredEval { value, var, pred } if i == 0 => Term::PredEval {
            value: Box::new(replace_at(value, rest, make)),
            var: *var,
            pred: pred.clone(),
        },
        Term::PredEval { value, var, pred } if i == 1 => Term::PredEval {
            value: value.clone(),
            var: *var,
            pred: Box::new(replace_at(pred, rest, make)),
        },
        Term::Fork(l, r) if i == 0 => {
            Term::Fork(Box::new(replace_at(l, rest, make)), r.clone())
        }
        Term::Fork(l, r) if i == 1 => {
            Term::Fork(l.clone(), Box::new(replace_at(r, rest, make)))
        }
        _ => unreachable!("replace_at: invalid path"),
    }
}

/// All (path, subterm) pairs in pre-order.
pub(crate) fn preorder<'t>(t: &'t Term) -> Vec<(Vec<usize>, &'t Term)> {
    let mut out = Vec::new();
    let mut stack = vec![(Vec::new(), t)];
    while let Some((path, node)) = stack.pop() {
        out.push((path.clone(), node));
        let kids = children(node);
        // Push right-to-left so the left child pops first.
        for (i, k) in kids.into_iter().enumerate().rev() {
            let mut p = path.clone();
            p.push(i);
            stack.push((p, k));
        }
    }
    out
}

/// The number of fork branches (leaves of the fork spine).
pub fn count_branches(t: &Term) -> usize {
    match t {
        Term::Fork(l, r) => count_branches(l) + count_branches(r),
        _ => 1,
    }
}

// ---------------------------------------------------------------------------
// The stepper
// ---------------------------------------------------------------------------

/// Where the upward walk from a `⊥` assertion through legal `𝓑`
/// frames stops.
enum ZapBoundary {
    /// Reached a lambda: the whole body zaps (`Blame`).
    Lam(Vec<usize>),
    /// Reached a branch of a conditional: that branch zaps
    /// (`Blame/If/True` at child 1, `Blame/If/False` at child 2).
    IfBranch(Vec<usize>, usize),
    /// Every frame up to the branch root is legal (`Blame/Global`).
    Root,
}

struct SubsetStepper<'a, 'e> {
    store: &'a mut ConstraintStore,
    sub: &'a mut Subcontracting<'e>,
    env: &'e ImplicationEnv,
    verify_fuel: u64,
}

impl<'e> SubsetStepper<'_, 'e> {
    /// One deterministic step anywhere in the observation tree:
    /// leftmost branch first, tier priority within a branch. The
    /// returned path is relative to the tree root (fork children are
    /// 0 and 1).
    fn step_tree(
        &mut self,
        t: &Term,
        path: &mut Vec<usize>,
    ) -> Option<(Term, &'static str, Vec<usize>)> {
        if let Term::Fork(l, r) = t {
            path.push(0);
            let left = self.step_tree(l, path);
            path.pop();
            if let Some((l2, rule, p)) = left {
                return Some((Term::Fork(Box::new(l2), r.clone()), rule, p));
            }
            path.push(1);
            let right = self.step_tree(r, path);
            path.pop();
            return right
                .map(|(r2, rule, p)| (Term::Fork(l.clone(), Box::new(r2)), rule, p));
        }
        let (t2, rule, local) = self.step_branch(t)?;
        let mut full = path.clone();
        full.extend(local);
        Some((t2, rule, full))
    }

    /// One step within a fork-free branch, trying the tiers in
    /// priority order.
    fn step_branch(&mut self, t: &Term) -> Option<(Term, &'static str, Vec<usize>)> {
        if let Some(r) = self.tier_blame(t) {
            return Some(r);
        }
        if let Some(r) = self.tier_subset(t) {
            return Some(r);
        }
        if let Some(r) = self.tier_fork(t) {
            return Some(r);
        }
        if let Some(r) = self.tier_merge(t) {
            return Some(r);
        }
        if let Some(r) = self.tier_lift(t) {
            return Some(r);
        }
        if let Some(r) =
            baseline::step_restricted(self.store, self.sub, t, self.verify_fuel)
        {
            return Some(r);
        }
        if let Some(r) = self.tier_push_if(t) {
            return Some(r);
        }
        self.tier_lower(t)
    }

    /// Whether a term is canonical, decided by replaying the stepper
    /// against scratch state. Used for the `T` positions of the `𝓑`
    /// grammar, whose holes must not be preceded by unfinished work.
    fn term_canonical(&self, t: &Term) -> bool {
        let mut store = self.store.clone();
        let mut sub = Subcontracting::new(self.env);
        let mut scratch = SubsetStepper {
            store: &mut store,
            sub: &mut sub,
            env: self.env,
            verify_fuel: self.verify_fuel,
        };
        scratch.step_tree(t, &mut Vec::new()).is_none()
    }

    // -- Tier 1: Blame ---------------------------------------------------

    /// Walks from the node at `path` upward through the branch,
    /// checking that every frame on the way is a legal `𝓑` frame
    /// (`𝓑 ::= □ | 𝓑 M | T 𝓑 | op(T 𝓑) | assert 𝓑 ι C | if 𝓑 M N`),
    /// until a boundary (lambda body or conditional branch) or the
    /// root is reached. Returns `None` if an illegal frame intervenes.
    fn zap_boundary(&self, branch: &Term, path: &[usize]) -> Option<ZapBoundary> {
        for i in (0..path.len()).rev() {
            let parent = subterm_at(branch, &path[..i]).expect("valid path");
            let idx = path[i];
            match parent {
                Term::Lam(_, _) => return Some(ZapBoundary::Lam(path[..i].to_vec())),
                Term::If(_, _, _) if idx > 0 => {
                    return Some(ZapBoundary::IfBranch(path[..i].to_vec(), idx))
                }
                Term::If(_, _, _) => {} // condition hole: legal
                Term::App(f, _) => {
                    // Function hole is always legal; an argument hole
                    // requires the function to be canonical.
                    if idx == 1 && !self.term_canonical(f) {
                        return None;
                    }
                }
                Term::Op(_, l, _) => {
                    if idx == 1 && !self.term_canonical(l) {
                        return None;
                    }
                }
                Term::Assert { .. } => {}
                _ => return None,
            }
        }
        Some(ZapBoundary::Root)
    }

    fn tier_blame(&mut self, t: &Term) -> Option<(Term, &'static str, Vec<usize>)> {
        for (path, node) in preorder(t) {
            let Term::Assert {
                subject,
                blame: blame @ BlameRef::Var(_),
                contract: Contract::Bot,
            } = node
            else {
                continue;
            };
            // A zapped assertion wraps its blame term permanently; do
            // not zap it again.
            if matches!(**subject, Term::Blame(_, _)) {
                continue;
            }
            // The violation must have a resolvable blame term and be
            // guaranteed to surface at the root label.
            let Ok(blame_term) = self.store.blame_of(blame) else {
                continue;
            };
            if !self.store.zap_propagates(blame) {
                continue;
            }
            let Some(boundary) = self.zap_boundary(t, &path) else {
                continue;
            };
            let zapped = Term::Assert {
                subject: Box::new(blame_term.clone()),
                blame: blame.clone(),
                contract: Contract::Bot,
            };
            return Some(match boundary {
                ZapBoundary::Lam(lam_path) => {
                    let new = replace_at(t, &lam_path, &mut |lam| {
                        let Term::Lam(x, _) = lam else { unreachable!() };
                        Term::lam(x, zapped.clone())
                    });
                    (new, "Blame", lam_path)
                }
                ZapBoundary::IfBranch(if_path, idx) => {
                    let new = replace_at(t, &if_path, &mut |cond| {
                        let Term::If(c, a, b) = cond else { unreachable!() };
                        if idx == 1 {
                            Term::if_((**c).clone(), zapped.clone(), (**b).clone())
                        } else {
                            Term::if_((**c).clone(), (**a).clone(), zapped.clone())
                        }
                    });
                    let rule = if idx == 1 {
                        "Blame/If/True"
                    } else {
                        "Blame/If/False"
                    };
                    (new, rule, if_path)
                }
                ZapBoundary::Root => (blame_term, "Blame/Global", Vec::new()),
            });
        }
        None
    }

    // -- Tier 2: Subset/Left, Subset/Right -------------------------------

    /// Scans assertion stacks for a pair (outer frame, deeper frame)
    /// related by the naive subcontracting preorder. Positions advance
    /// pre-order; for a fixed outer frame, nearer partners are tried
    /// first. All frames from the outer to the partner must carry
    /// constraint variables.
    fn tier_subset(&mut self, t: &Term) -> Option<(Term, &'static str, Vec<usize>)> {
        for (path, node) in preorder(t) {
            let Term::Assert {
                blame: BlameRef::Var(_),
                contract: outer_c,
                ..
            } = node
            else {
                continue;
            };
            let (stack, _) = AssertionContext::peel(node);
            let n = stack.len();
            // stack.frames is innermost-first; the outer frame is the
            // last entry. Partners from nearest inward.
            let outer = &stack.frames[n - 1];
            debug_assert_eq!(&outer.1, outer_c);
            for k in (0..n - 1).rev() {
                let inner = &stack.frames[k];
                if !matches!(inner.0, BlameRef::Var(_)) {
                    break; // a label frame interrupts the ι stack
                }
                let c = &inner.1;
                let d = &outer.1;
                let c_sub_d = self.sub.naive_sub(c, d);
                let d_sub_c = self.sub.naive_sub(d, c);
                if c_sub_d && !d_sub_c {
                    // Keep the more restrictive inner contract; drop
                    // the outer wrapper.
                    let new = replace_at(t, &path, &mut |outer_t| {
                        let Term::Assert { subject, .. } = outer_t else {
                            unreachable!()
                        };
                        (**subject).clone()
                    });
                    return Some((new, "Subset/Left", path));
                }
                if d_sub_c {
                    // The outer contract is at least as restrictive
                    // (including mutual subsumption): move it to the
                    // inner position.
                    let depth = n - 1 - k; // asserts below the outer node
                    let outer_frame = (outer.0.clone(), outer.1.clone());
                    let new = replace_at(t, &path, &mut |outer_t| {
                        let Term::Assert { subject, .. } = outer_t else {
                            unreachable!()
                        };
                        // Inside `subject`, walk depth-1 asserts, then
                        // replace the frame at the partner node.
                        let mut inner_path = Vec::new();
                        for _ in 0..depth - 1 {
                            inner_path.push(0);
                        }
                        replace_at(subject, &inner_path, &mut |inner_t| {
                            let Term::Assert { subject: s, .. } = inner_t else {
                                unreachable!()
                            };
                            Term::Assert {
                                subject: s.clone(),
                                blame: outer_frame.0.clone(),
                                contract: outer_frame.1.clone(),
                            }
                        })
                    });
                    return Some((new, "Subset/Right", path));
                }
            }
        }
        None
    }

    // -- Tier 3: Fork/Union, Fork/Intersection ---------------------------

    fn tier_fork(&mut self, t: &Term) -> Option<(Term, &'static str, Vec<usize>)> {
        for (path, node) in preorder(t) {
            match node {
                // Fork/Union: a union splits the whole branch, one
                // alternative per side.
                Term::Assert {
                    subject,
                    blame: BlameRef::Var(v),
                    contract: Contract::Or(c, d),
                } => {
                    let i1 = self.store.fresh_var();
                    let i2 = self.store.fresh_var();
                    self.store
                        .append_forked(BlameRef::Var(*v), ConstraintDef::Or(i1, i2));
                    let left = replace_at(t, &path, &mut |_| {
                        Term::assert_var((**subject).clone(), i1, (**c).clone())
                    });
                    let right = replace_at(t, &path, &mut |_| {
                        Term::assert_var((**subject).clone(), i2, (**d).clone())
                    });
                    return Some((
                        Term::Fork(Box::new(left), Box::new(right)),
                        "Fork/Union",
                        path,
                    ));
                }
                // Fork/Intersection: a delayed intersection on an
                // applied function splits the branch, one member per
                // side.
                Term::App(f, a) => {
                    let Term::Assert {
                        subject,
                        blame: BlameRef::Var(v),
                        contract: contract @ Contract::And(q, r),
                    } = &**f
                    else {
                        continue;
                    };
                    if !contract.is_delayed() {
                        continue;
                    }
                    let i1 = self.store.fresh_var();
                    let i2 = self.store.fresh_var();
                    self.store
                        .append_forked(BlameRef::Var(*v), ConstraintDef::And(i1, i2));
                    let left = replace_at(t, &path, &mut |_| {
                        Term::app(
                            Term::assert_var((**subject).clone(), i1, (**q).clone()),
                            (**a).clone(),
                        )
                    });
                    let right = replace_at(t, &path, &mut |_| {
                        Term::app(
                            Term::assert_var((**subject).clone(), i2, (**r).clone()),
                            (**a).clone(),
                        )
                    });
                    return Some((
                        Term::Fork(Box::new(left), Box::new(right)),
                        "Fork/Intersection",
                        path,
                    ));
                }
                _ => {}
            }
        }
        None
    }

    // -- Tier 4: Merge ---------------------------------------------------

    /// The merged contract if the (outer, inner) frame pair is a
    /// domain half and a range half of one function contract, in
    /// either orientation: inner `(C→⊤)` under outer `(⊤→D)` as in
    /// the rule, or the mirror image produced when Lift runs before
    /// Lower on the same function.
    fn merge_shapes(outer: &Contract, inner: &Contract) -> Option<(Contract, Contract)> {
        let (Contract::Func(od, or), Contract::Func(id, ir)) = (outer, inner) else {
            return None;
        };
        let top = |c: &Contract| matches!(c, Contract::Top);
        if top(od) && top(ir) && !(top(or) && top(id)) {
            // outer (⊤→D), inner (C→⊤)
            return Some(((**id).clone(), (**or).clone()));
        }
        if top(or) && top(id) {
            // outer (C→⊤), inner (⊤→D)
            return Some(((**od).clone(), (**ir).clone()));
        }
        None
    }

    fn tier_merge(&mut self, t: &Term) -> Option<(Term, &'static str, Vec<usize>)> {
        for (path, node) in preorder(t) {
            let Term::Assert {
                blame: outer_b @ BlameRef::Var(_),
                ..
            } = node
            else {
                continue;
            };
            let (stack, _) = AssertionContext::peel(node);
            let n = stack.len();
            let outer = &stack.frames[n - 1];
            let Ok(outer_blame) = self.store.blame_of(outer_b) else {
                continue;
            };
            for k in (0..n - 1).rev() {
                let inner = &stack.frames[k];
                if !matches!(inner.0, BlameRef::Var(_)) {
                    break;
                }
                let Some((dom, rng)) = Self::merge_shapes(&outer.1, &inner.1) else {
                    continue;
                };
                // Both halves must blame the same party.
                let Ok(inner_blame) = self.store.blame_of(&inner.0) else {
                    continue;
                };
                if inner_blame != outer_blame {
                    continue;
                }
                let i3 = self.store.fresh_var();
                self.store
                    .append(outer.0.clone(), ConstraintDef::Indirect(i3));
                self.store
                    .append(inner.0.clone(), ConstraintDef::Indirect(i3));
                let depth = n - 1 - k;
                let merged = Contract::func(dom, rng);
                let new = replace_at(t, &path, &mut |outer_t| {
                    let Term::Assert { subject, .. } = outer_t else {
                        unreachable!()
                    };
                    let mut inner_path = Vec::new();
                    for _ in 0..depth - 1 {
                        inner_path.push(0);
                    }
                    replace_at(subject, &inner_path, &mut |inner_t| {
                        let Term::Assert { subject: s, .. } = inner_t else {
                            unreachable!()
                        };
                        Term::assert_var((**s).clone(), i3, merged.clone())
                    })
                });
                return Some((new, "Merge", path));
            }
        }
        None
    }

    // -- Tier 5: Lift ----------------------------------------------------

    fn tier_lift(&mut self, t: &Term) -> Option<(Term, &'static str, Vec<usize>)> {
        for (path, node) in preorder(t) {
            let Term::Lam(x, body) = node else { continue };
            // Search the body for an assertion on the lambda's own
            // parameter carrying a liftable immediate contract (a
            // predicate: ⊤ converts and ⊥ zaps instead), reachable
            // through legal 𝓑 frames only. Boundaries (inner lambdas,
            // conditional branches) block lifting — such checks might
            // never happen at run time. Inner lambdas also shadow the
            // binder, so skipping them is binding-correct.
            let Some(target) = self.find_lift_target(node, body, x) else {
                continue;
            };
            let Term::Assert { blame, contract, .. } =
                subterm_at(node, &target).expect("valid path")
            else {
                unreachable!()
            };
            let i1 = self.store.fresh_var();
            self.store.append(blame.clone(), ConstraintDef::Not(i1));
            let stripped_lam = replace_at(node, &target, &mut |_| Term::var(x));
            let lifted = Term::assert_var(
                stripped_lam,
                i1,
                Contract::func(contract.clone(), Contract::Top),
            );
            let new = replace_at(t, &path, &mut |_| lifted.clone());
            return Some((new, "Lift", path));
        }
        None
    }

    /// The pre-order-first liftable assertion on binder `x` within the
    /// lambda at the root of `lam` (whose body is `body`). Returned
    /// paths are relative to the lambda node (starting with 0 for the
    /// body).
    fn find_lift_target(&self, lam: &Term, body: &Term, x: &str) -> Option<Vec<usize>> {
        for (sub_path, node) in preorder(body) {
            let Term::Assert {
                subject,
                blame: BlameRef::Var(_),
                contract: Contract::Flat(_) | Contract::Named(_),
            } = node
            else {
                continue;
            };
            if !matches!(&**subject, Term::Var(y) if y == x) {
                continue;
            }
            let mut full = vec![0];
            full.extend(sub_path);
            // Legality walk stops at the lambda's own frame (index 0
            // of the walk is the lambda node itself: its body hole is
            // the boundary we start from, so require the walk to end
            // exactly there with no other boundary in between).
            match self.zap_boundary(lam, &full) {
                Some(ZapBoundary::Lam(p)) if p.is_empty() => return Some(full),
                _ => continue,
            }
        }
        None
    }

    // -- Tier 7: Push/If -------------------------------------------------

    fn tier_push_if(&mut self, t: &Term) -> Option<(Term, &'static str, Vec<usize>)> {
        for (path, node) in preorder(t) {
            let Term::If(cond, then_t, else_t) = node else {
                continue;
            };
            let (then_stack, then_core) = AssertionContext::peel(then_t);
            let (else_stack, else_core) = AssertionContext::peel(else_t);
            if then_stack
                .frames
                .iter()
                .chain(&else_stack.frames)
                .any(|(b, _)| !matches!(b, BlameRef::Var(_)))
            {
                continue;
            }
            // Find a common frame, outermost-first on the then-side.
            let mut found = None;
            'outer: for ti in (0..then_stack.len()).rev() {
                for ei in (0..else_stack.len()).rev() {
                    if then_stack.frames[ti] == else_stack.frames[ei] {
                        found = Some((ti, ei));
                        break 'outer;
                    }
                }
            }
            let (ti, ei) = found?;
            let frame = then_stack.frames[ti].clone();
            let strip = |stack: &AssertionContext, skip: usize, core: &Term| {
                let remaining = AssertionContext {
                    frames: stack
                        .frames
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != skip)
                        .map(|(_, f)| f.clone())
                        .collect(),
                };
                remaining.wrap(core.clone())
            };
            let new_then = strip(&then_stack, ti, then_core);
            let new_else = strip(&else_stack, ei, else_core);
            let hoisted = Term::Assert {
                subject: Box::new(Term::if_((**cond).clone(), new_then, new_else)),
                blame: frame.0,
                contract: frame.1,
            };
            let new = replace_at(t, &path, &mut |_| hoisted.clone());
            return Some((new, "Push/If", path));
        }
        None
    }

    // -- Tier 8: Lower ---------------------------------------------------

    fn tier_lower(&mut self, t: &Term) -> Option<(Term, &'static str, Vec<usize>)> {
        for (path, node) in preorder(t) {
            let Term::Lam(x, body) = node else { continue };
            let Term::Assert {
                subject,
                blame: blame @ BlameRef::Var(_),
                contract,
            } = &**body
            else {
                continue;
            };
            // The function's result must not be its own parameter —
            // lifting an immediate contract on the parameter is the
            // caller's obligation (rule Lift), not the function's.
            // A delayed contract on the parameter stays the
            // function's, so it lowers regardless.
            if matches!(&**subject, Term::Var(y) if y == x) && !contract.is_delayed() {
                continue;
            }
            let lowered = Term::Assert {
                subject: Box::new(Term::lam(x, (**subject).clone())),
                blame: blame.clone(),
                contract: Contract::func(Contract::Top, contract.clone()),
            };
            let new = replace_at(t, &path, &mut |_| lowered.clone());
            return Some((new, "Lower", path));
        }
        None
    }
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

/// Applies one subset step, if any rule fires.
pub fn subset_step(
    store: &ConstraintStore,
    t: &ObservationTree,
    env: &ImplicationEnv,
    cfg: &SubsetConfig,
) -> Option<(ConstraintStore, ObservationTree, TransformStep)> {
    let mut new_store = store.clone();
    let mut sub = Subcontracting::new(env);
    let before_len = new_store.len();
    let mut stepper = SubsetStepper {
        store: &mut new_store,
        sub: &mut sub,
        env,
        verify_fuel: cfg.verify_fuel,
    };
    let (after, rule, path) = stepper.step_tree(t, &mut Vec::new())?;
    let delta = new_store.constraints()[before_len..].to_vec();
    let step = TransformStep {
        rule: rule.into(),
        path,
        before: t.clone(),
        after: after.clone(),
        store_delta: delta,
    };
    Some((new_store, after, step))
}

/// Drives the subset transformation to canonical form.
pub fn subset_normalize(
    store: ConstraintStore,
    t: Term,
    env: &ImplicationEnv,
    cfg: &SubsetConfig,
) -> Result<(ConstraintStore, ObservationTree, Vec<TransformStep>), SubsetError> {
    let mut store = store;
    let mut term = normalize_contracts(t);
    let mut sub = Subcontracting::new(env);
    let mut trace = Vec::new();
    for _ in 0..cfg.step_cap {
        let before_len = store.len();
        let mut stepper = SubsetStepper {
            store: &mut store,
            sub: &mut sub,
            env,
            verify_fuel: cfg.verify_fuel,
        };
        match stepper.step_tree(&term, &mut Vec::new()) {
            Some((after, rule, path)) => {
                trace.push(TransformStep {
                    rule: rule.into(),
                    path,
                    before: term.clone(),
                    after: after.clone(),
                    store_delta: store.constraints()[before_len..].to_vec(),
                });
                term = after;
                if count_branches(&term) > cfg.max_branches {
                    return Err(SubsetError::BranchLimitExceeded {
                        limit: cfg.max_branches,
                    });
                }
            }
            None => return Ok((store, term, trace)),
        }
    }
    Err(SubsetError::StepBudgetExceeded { cap: cfg.step_cap })
}

// ---------------------------------------------------------------------------
// Canonicity
// ---------------------------------------------------------------------------

/// Canonicity relative to a constraint store: the exact complement of
/// [`subset_step`] under that store. The store matters because a `⊥`
/// assertion only transforms when its blame term resolves and its
/// violation provably propagates to the root label, and a merge
/// candidate only transforms when both halves blame the same party.
pub fn is_canonical_subset_with(
    t: &Term,
    store: &ConstraintStore,
    env: &ImplicationEnv,
    cfg: &SubsetConfig,
) -> SubsetCanonicity {
    let mut store = store.clone();
    if let Some(max) = crate::eval::max_blame_var(t) {
        store.reserve_through(max);
    }
    match subset_step(&store, t, env, cfg) {
        Some((_, _, step)) => SubsetCanonicity::Transformable {
            rule: step.rule,
            path: step.path,
        },
        None => SubsetCanonicity::Canonical,
    }
}

/// Canonicity against an empty store: structural conditions (stack
/// incomparability, fork/lift/lower/push patterns, the baseline
/// grammar) are checked fully, while the store-dependent blame
/// machinery is treated conservatively (an unresolvable `⊥` assertion
/// counts as canonical).
pub fn is_canonical_subset(t: &Term) -> SubsetCanonicity {
    is_canonical_subset_with(
        t,
        &ConstraintStore::new(),
        &ImplicationEnv::standard(),
        &SubsetConfig::default(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::Polarity;
    use crate::syntax::{parse_source, parse_term, print_term};

    fn norm(src: &str) -> (ConstraintStore, Term, Vec<TransformStep>) {
        let t = parse_source(src).expect("parse").term;
        subset_normalize(
            ConstraintStore::new(),
            t,
            &ImplicationEnv::standard(),
            &SubsetConfig::default(),
        )
        .expect("normalize")
    }

    fn prepared(src: &str) -> (ConstraintStore, Term) {
        let t = parse_term(src).expect("parse");
        let mut store = ConstraintStore::new();
        if let Some(max) = crate::eval::max_blame_var(&t) {
            store.reserve_through(max);
        }
        (store, t)
    }

    fn step1(src: &str) -> (ConstraintStore, Term, TransformStep) {
        let (store, t) = prepared(src);
        subset_step(
            &store,
            &t,
            &ImplicationEnv::standard(),
            &SubsetConfig::default(),
        )
        .expect("a rule should fire")
    }

    fn canonical_with(t: &Term, store: &ConstraintStore) -> bool {
        is_canonical_subset_with(
            t,
            store,
            &ImplicationEnv::standard(),
            &SubsetConfig::default(),
        )
        .is_canonical()
    }

    #[test]
    fn fork_union_splits_branch_and_records_fork_constraint() {
        let (store, after, step) = step1("(assert 5 @0 (cup Number? String?))");
        assert_eq!(step.rule, "Fork/Union");
        assert_eq!(
            print_term(&after),
            "(fork (assert 5 @1 Number?) (assert 5 @2 String?))"
        );
        assert!(store.dump().contains("@0 <- (cup @1 @2)"), "{}", store.dump());
        assert!(store.constraints().last().unwrap().from_fork);
    }

    #[test]
    fn fork_intersection_splits_at_application() {
        let (store, after, step) = step1(
            "((assert f @0 (cap (-> Number? Number?) (-> String? String?))) 5)",
        );
        assert_eq!(step.rule, "Fork/Intersection");
        assert_eq!(
            print_term(&after),
            "(fork ((assert f @1 (-> Number? Number?)) 5) \
             ((assert f @2 (-> String? String?)) 5))"
        );
        assert!(store.dump().contains("@0 <- (cap @1 @2)"), "{}", store.dump());
    }

    #[test]
    fn unapplied_delayed_intersection_is_canonical() {
        let (store, t) =
            prepared("(assert f @0 (cap (-> Number? Number?) (-> String? String?)))");
        assert!(canonical_with(&t, &store));
    }

    #[test]
    fn lift_moves_parameter_predicate_to_domain() {
        let (store, after, step) = step1("(lam x (+ (assert x @0 Number?) 1))");
        assert_eq!(step.rule, "Lift");
        assert_eq!(
            print_term(&after),
            "(assert (lam x (+ x 1)) @1 (-> Number? top))"
        );
        assert!(store.dump().contains("@0 <- (not @1)"), "{}", store.dump());
    }

    #[test]
    fn lift_blocked_by_conditional_branch() {
        // The check sits in a conditional branch: it might never run,
        // so it must not become a domain contract.
        let (store, t) = prepared("(lam x (if x (assert x @0 Number?) 0))");
        assert!(canonical_with(&t, &store));
    }

    #[test]
    fn lower_requires_result_distinct_from_parameter() {
        // An immediate contract on the parameter itself lifts to a
        // domain contract rather than lowering to a range contract.
        let (_, after, step) = step1("(lam x (assert x @0 Number?))");
        assert_eq!(step.rule, "Lift");
        assert_eq!(print_term(&after), "(assert (lam x x) @1 (-> Number? top))");

        // A contract on anything else lowers to a range contract.
        let (_, after, step) = step1("(lam x (assert y @0 Number?))");
        assert_eq!(step.rule, "Lower");
        assert_eq!(
            print_term(&after),
            "(assert (lam x y) @0 (-> top Number?))"
        );
    }

    #[test]
    fn blame_zaps_lambda_body_keeping_wrapper() {
        let (_, t) = prepared("(lam x (+ 1 (assert 7 @0 bot)))");
        let mut store = ConstraintStore::new();
        store.reserve_through(0);
        store.append(BlameRef::Label("l".into()), ConstraintDef::Indirect(0));
        let (_, after, step) = subset_step(
            &store,
            &t,
            &ImplicationEnv::standard(),
            &SubsetConfig::default(),
        )
        .expect("step");
        assert_eq!(step.rule, "Blame");
        assert_eq!(print_term(&after), "(lam x (assert (blame #l +) @0 bot))");
    }

    #[test]
    fn blame_global_replaces_whole_branch() {
        let (_, t) = prepared("(+ 1 (assert 7 @0 bot))");
        let mut store = ConstraintStore::new();
        store.reserve_through(0);
        store.append(BlameRef::Label("l".into()), ConstraintDef::Indirect(0));
        let (_, after, step) = subset_step(
            &store,
            &t,
            &ImplicationEnv::standard(),
            &SubsetConfig::default(),
        )
        .expect("step");
        assert_eq!(step.rule, "Blame/Global");
        assert_eq!(after, Term::Blame("l".into(), Polarity::Positive));
    }

    #[test]
    fn blame_if_replaces_only_the_branch() {
        let (_, t) = prepared("(if c (assert 7 @0 bot) 3)");
        let mut store = ConstraintStore::new();
        store.reserve_through(0);
        store.append(BlameRef::Label("l".into()), ConstraintDef::Indirect(0));
        let (_, after, step) = subset_step(
            &store,
            &t,
            &ImplicationEnv::standard(),
            &SubsetConfig::default(),
        )
        .expect("step");
        assert_eq!(step.rule, "Blame/If/True");
        assert_eq!(print_term(&after), "(if c (assert (blame #l +) @0 bot) 3)");
    }

    #[test]
    fn blame_blocked_without_propagation_guarantee() {
        // The ⊥ sits under the subject side of a non-fork union
        // junction: the sibling alternative could still succeed, so
        // zapping would invent blame. The assertion must stay.
        let (_, t) = prepared("(lam x (+ 1 (assert 7 @1 bot)))");
        let mut store = ConstraintStore::new();
        store.reserve_through(2);
        store.append(BlameRef::Label("l".into()), ConstraintDef::Or(1, 2));
        assert!(canonical_with(&t, &store));
        // The same junction created by a fork does guarantee
        // propagation: each branch observes its alternative alone.
        let mut forked = ConstraintStore::new();
        forked.reserve_through(2);
        forked.append_forked(BlameRef::Label("l".into()), ConstraintDef::Or(1, 2));
        let (_, after, step) = subset_step(
            &forked,
            &t,
            &ImplicationEnv::standard(),
            &SubsetConfig::default(),
        )
        .expect("step");
        assert_eq!(step.rule, "Blame");
        assert_eq!(print_term(&after), "(lam x (assert (blame #l +) @1 bot))");
    }

    #[test]
    fn subset_left_keeps_more_restrictive_inner_contract() {
        // Positive? ⊑* Number?: the outer Number? check is redundant.
        let (_, after, step) = step1("(assert (assert f @0 Positive?) @1 Number?)");
        assert_eq!(step.rule, "Subset/Left");
        assert_eq!(print_term(&after), "(assert f @0 Positive?)");
    }

    #[test]
    fn subset_right_moves_outer_contract_inward() {
        // (-> Positive? Positive?) ⊑* (-> Number? top): the outer
        // function contract subsumes the inner domain half and takes
        // its place.
        let (_, after, step) = step1(
            "(assert (assert f @0 (-> Number? top)) @1 (-> Positive? Positive?))",
        );
        assert_eq!(step.rule, "Subset/Right");
        assert_eq!(print_term(&after), "(assert f @1 (-> Positive? Positive?))");
    }

    #[test]
    fn incomparable_stack_is_canonical() {
        let (store, t) =
            prepared("(assert (assert f @0 (-> Number? top)) @1 (-> top Number?))");
        // Give the two halves different blame parties so Merge cannot
        // fire either: @0 under a function domain flips polarity.
        let mut store = store;
        store.append(BlameRef::Label("l".into()), ConstraintDef::Func(0, 2));
        store.append(BlameRef::Label("l".into()), ConstraintDef::Indirect(1));
        assert!(canonical_with(&t, &store));
    }

    #[test]
    fn merge_combines_complementary_function_halves() {
        // Both halves trace to the same blame party.
        let (_, t) = prepared("(assert (assert f @1 (-> Number? top)) @2 (-> top Number?))");
        let mut store = ConstraintStore::new();
        store.reserve_through(2);
        store.append(BlameRef::Label("l".into()), ConstraintDef::Indirect(1));
        store.append(BlameRef::Label("l".into()), ConstraintDef::Indirect(2));
        let (store2, after, step) = subset_step(
            &store,
            &t,
            &ImplicationEnv::standard(),
            &SubsetConfig::default(),
        )
        .expect("step");
        assert_eq!(step.rule, "Merge");
        assert_eq!(print_term(&after), "(assert f @3 (-> Number? Number?))");
        // The outer frame's indirection is appended before the inner's.
        let tail = &store2.constraints()[2..];
        assert_eq!(tail.len(), 2);
        assert_eq!(tail[0].lhs, BlameRef::Var(2));
        assert!(matches!(tail[0].def, ConstraintDef::Indirect(3)));
        assert_eq!(tail[1].lhs, BlameRef::Var(1));
        assert!(matches!(tail[1].def, ConstraintDef::Indirect(3)));
    }

    #[test]
    fn merge_blocked_on_distinct_blame_parties() {
        let (_, t) = prepared("(assert (assert f @1 (-> Number? top)) @2 (-> top Number?))");
        let mut store = ConstraintStore::new();
        store.reserve_through(2);
        // @1 sits in a function domain: its blame polarity flips.
        store.append(BlameRef::Label("l".into()), ConstraintDef::Func(1, 2));
        assert!(canonical_with(&t, &store));
    }

    #[test]
    fn push_if_hoists_common_frame_through_stacks() {
        let (_, after, step) = step1(
            "(if c (assert (assert u @0 (-> String? String?)) @1 (-> Number? Number?)) \
             (assert w @1 (-> Number? Number?)))",
        );
        assert_eq!(step.rule, "Push/If");
        assert_eq!(
            print_term(&after),
            "(assert (if c (assert u @0 (-> String? String?)) w) @1 (-> Number? Number?))"
        );
    }

    #[test]
    fn addone1_normalizes_to_merged_function_contract() {
        // addOne delegates to a contracted plus; the subset system lifts
        // the residual checks out of the wrapper and merges the domain
        // and range halves back into one function contract.
        let (store, term, trace) = norm(
            "((lam plus (lam z ((plus 1) z))) \
             (assert (lam x (lam y (+ x y))) #plus \
             (-> Number? (-> Number? Number?))))",
        );
        let rules: Vec<&str> = trace.iter().map(|s| s.rule.as_str()).collect();
        assert_eq!(
            rules,
            [
                "Unfold/Assert",
                "Unroll",
                "Unfold/D-Function",
                "Unfold/D-Function",
                "Verify/True",
                "Convert/True",
                "Lift",
                "Lower",
                "Unfold/D-Function",
                "Convert/True",
                "Lower",
                "Lower",
                "Unfold/D-Function",
                "Merge",
                "Convert/True",
            ]
        );
        assert_eq!(
            print_term(&term),
            "(assert ((lam plus (lam z ((plus 1) z))) (lam x (lam y (+ x y)))) \
             @11 (-> Number? Number?))"
        );
        // Merge records the outer frame's indirection before the inner's.
        assert_eq!(
            store.dump(),
            "#plus <- @1\n\
             @1 <- (-> @2 @3)\n\
             @3 <- (-> @4 @5)\n\
             @2 <- true\n\
             @4 <- (not @6)\n\
             @6 <- (-> @7 @8)\n\
             @7 <- true\n\
             @5 <- (-> @9 @10)\n\
             @8 <- @11\n\
             @10 <- @11\n\
             @9 <- true\n"
        );
        assert_eq!(count_branches(&term), 1);
        let verdict = is_canonical_subset_with(
            &term,
            &store,
            &ImplicationEnv::standard(),
            &SubsetConfig::default(),
        );
        assert!(verdict.is_canonical(), "got {verdict:?}");
    }

    #[test]
    fn addone2_forks_into_number_and_string_branches() {
        let (store, term, trace) = norm(
            "((lam plus (lam z ((plus 1) z))) \
             (assert (lam x (lam y (+ x y))) #plus \
             (cap (-> Number? (-> Number? Number?)) \
                  (-> String? (-> String? String?)))))",
        );
        assert!(trace.iter().any(|s| s.rule == "Fork/Intersection"));
        assert_eq!(count_branches(&term), 2);
        let Term::Fork(l, r) = &term else {
            panic!("expected a fork, got {}", print_term(&term));
        };
        let left = print_term(l);
        let right = print_term(r);
        assert!(left.contains("(-> Number? Number?)"), "left: {left}");
        // The string branch statically fails on the literal argument 1
        // and zaps to a blame body under a residual (-> top bot).
        assert!(right.contains("blame"), "right: {right}");
        assert!(right.contains("(-> top bot)"), "right: {right}");
        let verdict = is_canonical_subset_with(
            &term,
            &store,
            &ImplicationEnv::standard(),
            &SubsetConfig::default(),
        );
        assert!(verdict.is_canonical(), "got {verdict:?}");
        // Fork bookkeeping: every fork step recorded exactly one
        // forked constraint.
        let fork_steps = trace
            .iter()
            .filter(|s| s.rule.starts_with("Fork/"))
            .count();
        let forked_constraints = store
            .constraints()
            .iter()
            .filter(|c| c.from_fork)
            .count();
        assert_eq!(fork_steps, forked_constraints);
    }

    #[test]
    fn progress_and_canonicity_are_exclusive_along_traces() {
        let programs = [
            "((lam plus (lam z ((plus 1) z))) \
             (assert (lam x (lam y (+ x y))) #plus \
             (-> Number? (-> Number? Number?))))",
            "(assert 5 #l (cup Number? String?))",
            "((lam plus (lam z ((plus 1) z))) \
             (assert (lam x (lam y (+ x y))) #plus \
             (cap (-> Number? (-> Number? Number?)) \
                  (-> String? (-> String? String?)))))",
        ];
        for src in programs {
            let t = parse_source(src).expect("parse").term;
            let env = ImplicationEnv::standard();
            let cfg = SubsetConfig::default();
            let mut store = ConstraintStore::new();
            let mut term = normalize_contracts(t);
            loop {
                let verdict = is_canonical_subset_with(&term, &store, &env, &cfg);
                match subset_step(&store, &term, &env, &cfg) {
                    Some((s2, t2, _)) => {
                        assert!(
                            !verdict.is_canonical(),
                            "canonical yet steppable: {}",
                            print_term(&term)
                        );
                        store = s2;
                        term = t2;
                    }
                    None => {
                        assert!(
                            verdict.is_canonical(),
                            "stuck yet non-canonical: {}",
                            print_term(&term)
                        );
                        break;
                    }
                }
            }
        }
    }

    #[test]
    fn branch_limit_reports_diagnostic() {
        // Each union forks once; nesting them forks combinatorially.
        let src = "(+ (assert 1 #a (cup Number? String?)) \
                     (+ (assert 2 #b (cup Number? String?)) \
                        (+ (assert 3 #c (cup Number? String?)) \
                           (assert 4 #d (cup Number? String?)))))";
        let t = parse_source(src).expect("parse").term;
        let err = subset_normalize(
            ConstraintStore::new(),
            t,
            &ImplicationEnv::standard(),
            &SubsetConfig {
                max_branches: 4,
                ..SubsetConfig::default()
            },
        )
        .expect_err("limit");
        assert_eq!(err, SubsetError::BranchLimitExceeded { limit: 4 });
    }
}
