//! The blame machinery: constraint store, least-interpretation solver,
//! blame-state detection, and the root-of / sign-of / blame-of
//! computations.
//!
//! Every contract assertion and every delayed-contract elimination
//! appends a constraint to an append-only store ς (youngest last). A
//! constraint relates the *subject* and *context* facets of a blame
//! identifier to the facets of the identifiers it was split into. The
//! solver computes the least interpretation μ under the information
//! ordering `true ⊏ false` — `false` on a subject facet means "the
//! value failed its contract", `false` on a context facet means "the
//! context used the value in violation of its contract".
//!
//! The store is topologically ordered: apart from indirections
//! introduced by the static merge/condense rules (which stay acyclic),
//! every right-hand-side variable of a constraint is allocated fresh
//! when the constraint is appended. The solver exploits this by
//! evaluating children before parents, which is required for exactness:
//! the function-constraint subject clause `subject(ι₁) ⇒ subject(ι₂)`
//! is not monotone in `subject(ι₁)`, so a naive all-true fixpoint
//! iteration could overshoot.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::ast::{BlameRef, BlameVar, Constant, Label, Polarity, Term};
use crate::syntax::print_term;

/// The right-hand side of a constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintDef {
    /// `b ↦ W`: a flat check on `b` evaluated to the value `W`.
    Truth(Term),
    /// `b ↦ ι`: `b` delegates to ι.
    Indirect(BlameVar),
    /// `b ↦ ι₁ → ι₂`: `b` was eliminated at an application; ι₁ guards
    /// the domain, ι₂ the range.
    Func(BlameVar, BlameVar),
    /// `b ↦ ι₁ ∩ ι₂`.
    And(BlameVar, BlameVar),
    /// `b ↦ ι₁ ∪ ι₂`.
    Or(BlameVar, BlameVar),
    /// `b ↦ ¬ι`: facets swapped (introduced by D-Domain and Lift).
    Not(BlameVar),
}

impl ConstraintDef {
    /// The blame variables the definition refers to.
    pub fn children(&self) -> Vec<BlameVar> {
        match self {
            ConstraintDef::Truth(_) => Vec::new(),
            ConstraintDef::Indirect(v) | ConstraintDef::Not(v) => [*v].into(),
            ConstraintDef::Func(a, b) | ConstraintDef::And(a, b) | ConstraintDef::Or(a, b) => {
                [*a, *b].into()
            }
        }
    }

    pub fn references(&self, v: BlameVar) -> bool {
        self.children().contains(&v)
    }
}

/// One store entry: `lhs ↦ def`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub lhs: BlameRef,
    pub def: ConstraintDef,
    /// True for the ∩/∪ constraints created by the subset
    /// transformation's fork rules; the blame-zapping rules are only
    /// sound along fork-created alternatives.
    pub from_fork: bool,
}

/// Errors from the auxiliary walks and the strict solver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintError {
    /// A blame variable has no parent chain leading to a label.
    Orphan(BlameVar),
    /// Strict mode: a referenced identifier has no defining constraint.
    Undefined(BlameRef),
}

impl core::fmt::Display for ConstraintError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ConstraintError::Orphan(v) => write!(f, "blame variable @{v} has no root label"),
            ConstraintError::Undefined(b) => match b {
                BlameRef::Label(l) => write!(f, "label #{l} has no defining constraint"),
                BlameRef::Var(v) => write!(f, "blame variable @{v} has no defining constraint"),
            },
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ConstraintError {}

/// `makeTruth`: a checked value counts as false only if it literally is
/// the constant `false` (after unwrapping).
pub fn make_truth(v: &Term) -> bool {
    !matches!(v.unwrap_value(), Term::Const(Constant::Bool(false)))
}

/// The two facets of a blame identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Facet {
    Subject,
    Context,
}

/// The least interpretation of a store: truth values for both facets of
/// every identifier. Missing identifiers read as true.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Interpretation {
    map: BTreeMap<BlameRef, (bool, bool)>,
}

impl Interpretation {
    pub fn subject(&self, b: &BlameRef) -> bool {
        self.map.get(b).map_or(true, |(s, _)| *s)
    }

    pub fn context(&self, b: &BlameRef) -> bool {
        self.map.get(b).map_or(true, |(_, c)| *c)
    }

    pub fn get(&self, b: &BlameRef, facet: Facet) -> bool {
        match facet {
            Facet::Subject => self.subject(b),
            Facet::Context => self.context(b),
        }
    }

    pub fn set(&mut self, b: BlameRef, subject: bool, context: bool) {
        self.map.insert(b, (subject, context));
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BlameRef, bool, bool)> {
        self.map.iter().map(|(b, (s, c))| (b, *s, *c))
    }
}

/// Append-only constraint store with a fresh-variable supply.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintStore {
    constraints: Vec<Constraint>,
    next_var: BlameVar,
}

impl ConstraintStore {
    pub fn new() -> ConstraintStore {
        ConstraintStore {
            constraints: Vec::new(),
            next_var: 1,
        }
    }

    /// Allocates a fresh blame variable (strictly increasing, never
    /// reused within one store).
    pub fn fresh_var(&mut self) -> BlameVar {
        let v = self.next_var;
        self.next_var += 1;
        v
    }

    /// Bumps the supply so that all variables `< n` count as used.
    /// Needed when a term with pre-existing blame variables (a golden
    /// snapshot, a transformed program) is evaluated against this
    /// store.
    pub fn reserve_through(&mut self, n: BlameVar) {
        if self.next_var <= n {
            self.next_var = n + 1;
        }
    }

    pub fn append(&mut self, lhs: BlameRef, def: ConstraintDef) {
        self.constraints.push(Constraint {
            lhs,
            def,
            from_fork: false,
        });
    }

    /// Appends a constraint marked as fork-created (subset
    /// transformation only).
    pub fn append_forked(&mut self, lhs: BlameRef, def: ConstraintDef) {
        self.constraints.push(Constraint {
            lhs,
            def,
            from_fork: true,
        });
    }

    /// Withdraws every fork license (see [`Self::zap_propagates`]).
    /// Once a fork has been joined, both alternatives live in the same
    /// term, so a failing check under the union no longer implies the
    /// union fails; its disjunction must guard blame like any other.
    pub fn clear_fork_licenses(&mut self) {
        for k in &mut self.constraints {
            k.from_fork = false;
        }
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// All identifiers occurring anywhere in the store (as lhs or rhs).
    pub fn ids(&self) -> BTreeSet<BlameRef> {
        let mut out = BTreeSet::new();
        for k in &self.constraints {
            out.insert(k.lhs.clone());
            for v in k.def.children() {
                out.insert(BlameRef::Var(v));
            }
        }
        out
    }

    fn defining<'a>(&'a self, b: &'a BlameRef) -> impl Iterator<Item = &'a Constraint> + 'a {
        self.constraints.iter().filter(move |k| &k.lhs == b)
    }

    /// Computes the least interpretation by evaluating children before
    /// parents. Identifiers without a defining constraint read as true
    /// (the lenient reading); [`ConstraintStore::solve_strict`] reports
    /// them instead.
    pub fn solve(&self) -> Interpretation {
        let mut memo: BTreeMap<(BlameRef, Facet), bool> = BTreeMap::new();
        let mut interp = Interpretation::default();
        for id in self.ids() {
            let s = self.eval_facet(&id, Facet::Subject, &mut memo, &mut BTreeSet::new());
            let c = self.eval_facet(&id, Facet::Context, &mut memo, &mut BTreeSet::new());
            interp.set(id, s, c);
        }
        interp
    }

    /// Like [`ConstraintStore::solve`], but errors on the first
    /// identifier that is referenced by some constraint yet has no
    /// defining constraint of its own.
    pub fn solve_strict(&self) -> Result<Interpretation, ConstraintError> {
        for k in &self.constraints {
            for v in k.def.children() {
                let id = BlameRef::Var(v);
                if self.defining(&id).next().is_none() {
                    return Err(ConstraintError::Undefined(id));
                }
            }
        }
        Ok(self.solve())
    }

    fn eval_facet(
        &self,
        b: &BlameRef,
        facet: Facet,
        memo: &mut BTreeMap<(BlameRef, Facet), bool>,
        in_progress: &mut BTreeSet<(BlameRef, Facet)>,
    ) -> bool {
        let key = (b.clone(), facet);
        if let Some(v) = memo.get(&key) {
            return *v;
        }
        if in_progress.contains(&key) {
            // Unreachable for stores produced by this crate (they are
            // acyclic); break the cycle leniently.
            return true;
        }
        in_progress.insert(key.clone());
        let mut result = true;
        let mut defined = false;
        // Collect first to appease the borrow checker (self.defining
        // borrows self immutably while we recurse).
        let defs: Vec<ConstraintDef> = self.defining(b).map(|k| k.def.clone()).collect();
        for def in defs {
            defined = true;
            let bound = self.constraint_bound(&def, facet, memo, in_progress);
            result = result && bound;
        }
        in_progress.remove(&key);
        if !defined {
            return true;
        }
        memo.insert(key, result);
        result
    }

    /// The lower bound one constraint imposes on its lhs facet, with
    /// child facets evaluated recursively.
    fn constraint_bound(
        &self,
        def: &ConstraintDef,
        facet: Facet,
        memo: &mut BTreeMap<(BlameRef, Facet), bool>,
        in_progress: &mut BTreeSet<(BlameRef, Facet)>,
    ) -> bool {
        let mut f = |v: BlameVar, fac: Facet| {
            self.eval_facet(&BlameRef::Var(v), fac, memo, in_progress)
        };
        match (def, facet) {
            // Ct-Flat: the subject is blamed iff the check came out
            // false; a flat check never blames its context.
            (ConstraintDef::Truth(w), Facet::Subject) => make_truth(w),
            (ConstraintDef::Truth(_), Facet::Context) => true,
            // CT-Indirection.
            (ConstraintDef::Indirect(v), Facet::Subject) => f(*v, Facet::Subject),
            (ConstraintDef::Indirect(v), Facet::Context) => f(*v, Facet::Context),
            // CT-Function: partial correctness of the function — the
            // subject only promises a good range for a good domain.
            (ConstraintDef::Func(d, r), Facet::Subject) => {
                f(*d, Facet::Context) && (!f(*d, Facet::Subject) || f(*r, Facet::Subject))
            }
            (ConstraintDef::Func(d, r), Facet::Context) => {
                f(*d, Facet::Subject) && f(*r, Facet::Context)
            }
            // CT-Intersection: the subject fulfills both constituents,
            // the context has the choice to fulfill one.
            (ConstraintDef::And(a, b), Facet::Subject) => {
                f(*a, Facet::Subject) && f(*b, Facet::Subject)
            }
            (ConstraintDef::And(a, b), Facet::Context) => {
                f(*a, Facet::Context) || f(*b, Facet::Context)
            }
            // Ct-Union: dually, the subject may satisfy either side,
            // the context needs to fulfill both.
            (ConstraintDef::Or(a, b), Facet::Subject) => {
                f(*a, Facet::Subject) || f(*b, Facet::Subject)
            }
            (ConstraintDef::Or(a, b), Facet::Context) => {
                f(*a, Facet::Context) && f(*b, Facet::Context)
            }
            // CT-Inversion: responsibilities swap.
            (ConstraintDef::Not(v), Facet::Subject) => f(*v, Facet::Context),
            (ConstraintDef::Not(v), Facet::Context) => f(*v, Facet::Subject),
        }
    }

    /// Detects a blame state: some source label with a false facet.
    /// Deterministic choice: the label whose first defining constraint
    /// is oldest wins; on that label the subject facet is checked
    /// before the context facet.
    pub fn blame_state(&self) -> Option<(Label, Polarity)> {
        self.blame_state_under(&self.solve())
    }

    /// [`ConstraintStore::blame_state`] against a precomputed
    /// interpretation.
    pub fn blame_state_under(&self, interp: &Interpretation) -> Option<(Label, Polarity)> {
        let mut seen = BTreeSet::new();
        for k in &self.constraints {
            if let BlameRef::Label(l) = &k.lhs {
                if !seen.insert(l.clone()) {
                    continue;
                }
                let b = BlameRef::Label(l.clone());
                if !interp.subject(&b) {
                    return Some((l.clone(), Polarity::Positive));
                }
                if !interp.context(&b) {
                    return Some((l.clone(), Polarity::Negative));
                }
            }
        }
        None
    }

    /// Finds the parent of a variable: the youngest constraint whose
    /// definition references it, together with whether the edge inverts
    /// polarity (function-domain and inversion edges do).
    fn parent_of(&self, v: BlameVar) -> Option<(&BlameRef, bool)> {
        self.constraints.iter().rev().find_map(|k| {
            let flips = match &k.def {
                ConstraintDef::Func(d, _) if *d == v => true,
                ConstraintDef::Not(n) if *n == v => true,
                def if def.references(v) => false,
                _ => return None,
            };
            Some((&k.lhs, flips))
        })
    }

    fn walk_to_root(&self, b: &BlameRef) -> Result<(Label, Polarity), ConstraintError> {
        let mut sign = Polarity::Positive;
        let mut cur = b.clone();
        let mut visited = BTreeSet::new();
        loop {
            match cur {
                BlameRef::Label(l) => return Ok((l, sign)),
                BlameRef::Var(v) => {
                    if !visited.insert(v) {
                        return Err(ConstraintError::Orphan(v));
                    }
                    match self.parent_of(v) {
                        None => return Err(ConstraintError::Orphan(v)),
                        Some((parent, flips)) => {
                            if flips {
                                sign = sign.flip();
                            }
                            cur = parent.clone();
                        }
                    }
                }
            }
        }
    }

    /// The source label reached by walking parent constraints
    /// youngest-first. A label is its own root.
    pub fn root_of(&self, b: &BlameRef) -> Result<Label, ConstraintError> {
        self.walk_to_root(b).map(|(l, _)| l)
    }

    /// The polarity accumulated along the walk to the root: positive at
    /// the root, flipped at each function-domain and inversion edge.
    pub fn sign_of(&self, b: &BlameRef) -> Result<Polarity, ConstraintError> {
        self.walk_to_root(b).map(|(_, p)| p)
    }

    /// The blame term for an identifier: label `root_of`, polarity
    /// `sign_of`.
    pub fn blame_of(&self, b: &BlameRef) -> Result<Term, ConstraintError> {
        self.walk_to_root(b).map(|(l, p)| Term::Blame(l, p))
    }

    /// Whether a violation recorded at `b` (a false subject facet, as a
    /// ⊥ contract produces) is guaranteed to surface as blame on the
    /// root label. The walk mirrors `sign_of`: the facet carrying the
    /// violation flips at function-domain and inversion edges. An
    /// intersection forwards a false subject but disjoins contexts, a
    /// union forwards a false context but disjoins subjects — so those
    /// junctions block propagation unless they were created by a Fork
    /// rule, where each branch observes its alternative in isolation.
    pub fn zap_propagates(&self, b: &BlameRef) -> bool {
        let mut subject_facet = true;
        let mut cur = b.clone();
        let mut visited = BTreeSet::new();
        loop {
            let v = match cur {
                BlameRef::Label(_) => return true,
                BlameRef::Var(v) => v,
            };
            if !visited.insert(v) {
                return false;
            }
            let parent = self
                .constraints
                .iter()
                .rev()
                .find(|k| k.def.references(v));
            let Some(k) = parent else { return false };
            match &k.def {
                ConstraintDef::Truth(_) | ConstraintDef::Indirect(_) => {}
                ConstraintDef::Not(_) => subject_facet = !subject_facet,
                ConstraintDef::Func(d, _) => {
                    if *d == v {
                        subject_facet = !subject_facet;
                    }
                }
                ConstraintDef::And(_, _) => {
                    if !subject_facet && !k.from_fork {
                        return false;
                    }
                }
                ConstraintDef::Or(_, _) => {
                    if subject_facet && !k.from_fork {
                        return false;
                    }
                }
            }
            cur = k.lhs.clone();
        }
    }

    /// Where a false truth recorded on `b` can be absorbed on its way
    /// to a blame label.  A union crossed in the subject facet and an
    /// intersection crossed in the context facet can each swallow the
    /// violation when their other alternative holds; every such
    /// crossing is reported as (constraint index, operand side).  Two
    /// identifiers with equal profiles propagate violations to blame
    /// under exactly the same conditions.
    pub fn absorption_profile(&self, b: &BlameRef) -> AbsorptionProfile {
        let mut subject_facet = true;
        let mut cur = b.clone();
        let mut visited = BTreeSet::new();
        let mut absorb = BTreeSet::new();
        loop {
            let v = match cur {
                BlameRef::Label(_) => return AbsorptionProfile::Reaches(absorb),
                BlameRef::Var(v) => v,
            };
            if !visited.insert(v) {
                return AbsorptionProfile::Ambiguous;
            }
            let mut parents = self
                .constraints
                .iter()
                .enumerate()
                .rev()
                .filter(|(_, k)| k.def.references(v));
            let Some((idx, k)) = parents.next() else {
                return AbsorptionProfile::Unreachable;
            };
            if parents.next().is_some() {
                // Propagation is not a single path; no claim.
                return AbsorptionProfile::Ambiguous;
            }
            let side = |x: &BlameVar| u8::from(*x != v);
            match &k.def {
                ConstraintDef::Truth(_) | ConstraintDef::Indirect(_) => {}
                ConstraintDef::Not(_) => subject_facet = !subject_facet,
                ConstraintDef::Func(d, _) => {
                    if *d == v {
                        subject_facet = !subject_facet;
                    }
                }
                ConstraintDef::And(x, _) => {
                    if !subject_facet {
                        absorb.insert((idx, side(x)));
                    }
                }
                ConstraintDef::Or(x, _) => {
                    if subject_facet {
                        absorb.insert((idx, side(x)));
                    }
                }
            }
            cur = k.lhs.clone();
        }
    }

    /// One constraint per line, oldest first: `@n <- def` /
    /// `#l <- def`. Truth outcomes print the recorded value.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for k in &self.constraints {
            let lhs = match &k.lhs {
                BlameRef::Label(l) => format!("#{l}"),
                BlameRef::Var(v) => format!("@{v}"),
            };
            let rhs = match &k.def {
                ConstraintDef::Truth(w) => print_term(w),
                ConstraintDef::Indirect(v) => format!("@{v}"),
                ConstraintDef::Func(a, b) => format!("(-> @{a} @{b})"),
                ConstraintDef::And(a, b) => format!("(cap @{a} @{b})"),
                ConstraintDef::Or(a, b) => format!("(cup @{a} @{b})"),
                ConstraintDef::Not(v) => format!("(not @{v})"),
            };
            out.push_str(&lhs);
            out.push_str(" <- ");
            out.push_str(&rhs);
            out.push('\n');
        }
        out
    }
}

/// Exhaustive reference solver for differential testing. Enumerates all
/// `2^(2n)` facet assignments over the store's identifiers and keeps
/// the *supported models*: assignments where every facet equals the
/// conjunction of the bounds its defining constraints impose (children
/// read from the same assignment) and identifiers without a defining
/// constraint are pinned true. On topologically ordered stores exactly
/// one supported model exists — the least interpretation. Returns the
/// pointwise meet of the supported models (= the unique one). Panics if
/// the store has more than 16 identifiers; intended for small stores
/// only.
pub fn brute_force_least(store: &ConstraintStore) -> Interpretation {
    let ids: Vec<BlameRef> = store.ids().into_iter().collect();
    let n = ids.len();
    assert!(n <= 16, "brute force is exponential; got {n} identifiers");
    let defined: BTreeSet<&BlameRef> = store.constraints().iter().map(|k| &k.lhs).collect();

    let facet_of = |assignment: u64, idx: usize, facet: Facet| -> bool {
        let bit = match facet {
            Facet::Subject => 2 * idx,
            Facet::Context => 2 * idx + 1,
        };
        assignment & (1u64 << bit) == 0 // bit set = false (violated)
    };
    let index_of = |b: &BlameRef| ids.iter().position(|i| i == b);

    let mut models: Vec<u64> = Vec::new();
    for assignment in 0..(1u64 << (2 * n)) {
        let value = |v: BlameVar, facet: Facet| -> bool {
            match index_of(&BlameRef::Var(v)) {
                Some(i) => facet_of(assignment, i, facet),
                None => true,
            }
        };
        let mut ok = true;
        'ids: for (i, id) in ids.iter().enumerate() {
            if !defined.contains(id) {
                // Lenient pinning: no defining constraint means true.
                if !facet_of(assignment, i, Facet::Subject)
                    || !facet_of(assignment, i, Facet::Context)
                {
                    ok = false;
                    break 'ids;
                }
                continue;
            }
            for facet in [Facet::Subject, Facet::Context] {
                let mut folded = true;
                for k in store.constraints().iter().filter(|k| &k.lhs == id) {
                    let bound = match (&k.def, facet) {
                        (ConstraintDef::Truth(w), Facet::Subject) => make_truth(w),
                        (ConstraintDef::Truth(_), Facet::Context) => true,
                        (ConstraintDef::Indirect(v), f) => value(*v, f),
                        (ConstraintDef::Func(d, r), Facet::Subject) => {
                            value(*d, Facet::Context)
                                && (!value(*d, Facet::Subject) || value(*r, Facet::Subject))
                        }
                        (ConstraintDef::Func(d, r), Facet::Context) => {
                            value(*d, Facet::Subject) && value(*r, Facet::Context)
                        }
                        (ConstraintDef::And(a, b), Facet::Subject) => {
                            value(*a, Facet::Subject) && value(*b, Facet::Subject)
                        }
                        (ConstraintDef::And(a, b), Facet::Context) => {
                            value(*a, Facet::Context) || value(*b, Facet::Context)
                        }
                        (ConstraintDef::Or(a, b), Facet::Subject) => {
                            value(*a, Facet::Subject) || value(*b, Facet::Subject)
                        }
                        (ConstraintDef::Or(a, b), Facet::Context) => {
                            value(*a, Facet::Context) && value(*b, Facet::Context)
                        }
                        (ConstraintDef::Not(v), Facet::Subject) => value(*v, Facet::Context),
                        (ConstraintDef::Not(v), Facet::Context) => value(*v, Facet::Subject),
                    };
                    folded = folded && bound;
                }
                if facet_of(assignment, i, facet) != folded {
                    ok = false;
                    break 'ids;
                }
            }
        }
        if ok {
            models.push(assignment);
        }
    }

    // Pointwise meet (toward true): a facet is false only if every
    // supported model makes it false. With the uniqueness guarantee
    // this just reads off the single model.
    let mut interp = Interpretation::default();
    for (i, id) in ids.iter().enumerate() {
        let s = models.iter().any(|&a| facet_of(a, i, Facet::Subject));
        let c = models.iter().any(|&a| facet_of(a, i, Facet::Context));
        interp.set(id.clone(), s, c);
    }
    interp
}
