//! The baseline transformation `⇝_B`: a static rewriting system that
//! unfolds contract assertions into the constraint store, unrolls
//! delayed contracts to the use sites of a function, verifies flat
//! predicates on known values at transformation time, and pushes
//! residual assertions into a canonical arrangement.
//!
//! The transformation is strongly blame-preserving: running a program
//! before and after normalization yields the same outcome (value,
//! blame label and polarity, or stuckness) while never increasing the
//! number of run-time predicate checks.
//!
//! Strategy: each step applies the single highest-priority rule at
//! the leftmost-outermost transformable position (pre-order: a node
//! is considered before its children, children left to right).

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::ast::{BlameRef, Contract, Term};
use crate::constraint::{Constraint, ConstraintDef, ConstraintStore};
use crate::eval::{run, EvalConfig, Outcome};
use crate::subcontract::{ImplicationEnv, Subcontracting};
use crate::syntax::normalize_contracts;

/// Fuel for transformation-time predicate evaluation (Verify rules).
pub const DEFAULT_VERIFY_FUEL: u64 = 10_000;

/// Upper bound on normalization steps; reaching it signals a cycle
/// bug, which the rule system is designed to exclude.
pub const DEFAULT_STEP_CAP: u64 = 100_000;

/// Tuning knobs shared by the static transformations.
#[derive(Debug, Clone)]
pub struct TransformConfig {
    pub verify_fuel: u64,
    pub step_cap: u64,
}

impl Default for TransformConfig {
    fn default() -> TransformConfig {
        TransformConfig {
            verify_fuel: DEFAULT_VERIFY_FUEL,
            step_cap: DEFAULT_STEP_CAP,
        }
    }
}

/// A single transformation step, for traces and replay checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformStep {
    /// Rule name, e.g. "Unfold/D-Function".
    pub rule: String,
    /// Path of child indices from the root to the rewritten node.
    pub path: Vec<usize>,
    /// The whole term before the step.
    pub before: Term,
    /// The whole term after the step.
    pub after: Term,
    /// Constraints appended to the store by this step.
    pub store_delta: Vec<Constraint>,
}

/// Errors from driving a transformation to canonical form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransformError {
    /// The step budget was exhausted without reaching canonical form.
    StepBudgetExceeded { cap: u64 },
}

impl core::fmt::Display for TransformError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TransformError::StepBudgetExceeded { cap } => {
                write!(f, "transformation exceeded the step budget of {cap}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for TransformError {}

/// Verdict of the canonical-form check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BaselineCanonicity {
    Canonical,
    Transformable { rule: String, path: Vec<usize> },
}

impl BaselineCanonicity {
    pub fn is_canonical(&self) -> bool {
        matches!(self, BaselineCanonicity::Canonical)
    }
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

/// Strips `@ι`-assertions with ⊥ contracts; returns the core and
/// whether every stripped wrapper was a ⊥ (the value context 𝓥).
pub(crate) fn strip_bot_wrappers(t: &Term) -> &Term {
    let mut cur = t;
    while let Term::Assert {
        subject,
        blame: BlameRef::Var(_),
        contract: Contract::Bot,
    } = cur
    {
        cur = subject;
    }
    cur
}

/// `𝓥[K | λx.M]`: a constant or lambda under ⊥ wrappers only.
pub(crate) fn bot_wrapped_value(t: &Term) -> Option<&Term> {
    let core = strip_bot_wrappers(t);
    match core {
        Term::Const(_) | Term::Lam(_, _) => Some(core),
        _ => None,
    }
}

/// The subject class accepted by the Verify rules: a constant or
/// lambda under immediate `@ι` wrappers. Returns the core value.
pub(crate) fn immediate_wrapped_value(t: &Term) -> Option<&Term> {
    let mut cur = t;
    loop {
        match cur {
            Term::Const(_) | Term::Lam(_, _) => return Some(cur),
            Term::Assert {
                subject,
                blame: BlameRef::Var(_),
                contract,
            } if contract.is_immediate() => cur = subject,
            _ => return None,
        }
    }
}

/// Decides a predicate contract against a core value by bounded
/// evaluation in a fresh store. `None` means the rule cannot fire
/// (non-predicate contract, or the check got stuck, blamed, or ran
/// out of fuel).
pub(crate) fn try_verify(contract: &Contract, core: &Term, fuel: u64) -> Option<bool> {
    match contract {
        Contract::Named(p) => Some(p.holds(core)),
        Contract::Flat(m) => {
            let check = Term::app((**m).clone(), core.clone());
            match run(&check, &EvalConfig { fuel }) {
                Outcome::Value { value, .. } => Some(crate::constraint::make_truth(&value)),
                _ => None,
            }
        }
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// The stepper
// ---------------------------------------------------------------------------

struct Stepper<'a, 'e> {
    store: &'a mut ConstraintStore,
    sub: &'a mut Subcontracting<'e>,
    verify_fuel: u64,
    /// When the stepper runs as the shared tier inside the subset
    /// transformation, the rules that the subset system replaces with
    /// fork-, stack-, and boundary-aware variants are switched off:
    /// Unfold/Union, Unfold/D-Intersection, Push/If, and Lower.
    subset_mode: bool,
}

impl Stepper<'_, '_> {
    /// Tries every rule anchored at this node, honoring the priority
    /// order Simplify/* > Verify/* > Convert/True > Push/Immediate >
    /// Push/False > Unfold/* > Unroll > Push/If > Lower. Mutates the
    /// store only when returning `Some`.
    fn apply_here(&mut self, t: &Term) -> Option<(Term, &'static str)> {
        match t {
            Term::Assert {
                subject,
                blame,
                contract,
            } => self.assert_rules(subject, blame, contract),
            Term::App(f, a) => self.app_rules(f, a),
            Term::Op(op, l, r) => {
                // Unfold/Op: a delayed contract in an operand position
                // can never be exercised, so it holds vacuously.
                for (i, operand) in [&**l, &**r].into_iter().enumerate() {
                    if let Term::Assert {
                        subject,
                        blame: BlameRef::Var(v),
                        contract,
                    } = operand
                    {
                        if contract.is_delayed() {
                            self.store
                                .append(BlameRef::Var(*v), ConstraintDef::Truth(Term::bool(true)));
                            let stripped = (**subject).clone();
                            let (nl, nr) = if i == 0 {
                                (stripped, (**r).clone())
                            } else {
                                ((**l).clone(), stripped)
                            };
                            return Some((Term::op(*op, nl, nr), "Unfold/Op"));
                        }
                    }
                }
                None
            }
            Term::If(c, t1, t2) if !self.subset_mode => {
                // Push/If: identical assertions on both branches hoist
                // out of the conditional.
                if let (
                    Term::Assert {
                        subject: s1,
                        blame: b1 @ BlameRef::Var(_),
                        contract: c1,
                    },
                    Term::Assert {
                        subject: s2,
                        blame: b2,
                        contract: c2,
                    },
                ) = (&**t1, &**t2)
                {
                    if b1 == b2 && c1 == c2 {
                        let lifted = Term::Assert {
                            subject: Box::new(Term::if_(
                                (**c).clone(),
                                (**s1).clone(),
                                (**s2).clone(),
                            )),
                            blame: b1.clone(),
                            contract: c1.clone(),
                        };
                        return Some((lifted, "Push/If"));
                    }
                }
                None
            }
            Term::Lam(x, body) if !self.subset_mode => {
                // Lower: lift an assertion on the body to a function
                // contract with a vacuous domain, reusing the blame
                // variable.
                if let Term::Assert {
                    subject,
                    blame: blame @ BlameRef::Var(_),
                    contract,
                } = &**body
                {
                    let lowered = Term::Assert {
                        subject: Box::new(Term::lam(x, (**subject).clone())),
                        blame: blame.clone(),
                        contract: Contract::func(Contract::Top, contract.clone()),
                    };
                    return Some((lowered, "Lower"));
                }
                None
            }
            _ => None,
        }
    }

    fn assert_rules(
        &mut self,
        subject: &Term,
        blame: &BlameRef,
        contract: &Contract,
    ) -> Option<(Term, &'static str)> {
        match blame {
            BlameRef::Label(_) => {
                // Simplify fires at assertion time, before Unfold/Assert.
                if subject.is_value() {
                    match contract {
                        Contract::Or(c, d) => {
                            if self.sub.ordinary_sub(c, d) {
                                return Some((
                                    Term::Assert {
                                        subject: Box::new(subject.clone()),
                                        blame: blame.clone(),
                                        contract: (**d).clone(),
                                    },
                                    "Simplify/Union/1",
                                ));
                            }
                            if self.sub.ordinary_sub(d, c) {
                                return Some((
                                    Term::Assert {
                                        subject: Box::new(subject.clone()),
                                        blame: blame.clone(),
                                        contract: (**c).clone(),
                                    },
                                    "Simplify/Union/2",
                                ));
                            }
                        }
                        Contract::And(c, d) => {
                            if self.sub.ordinary_sub(c, d) {
                                return Some((
                                    Term::Assert {
                                        subject: Box::new(subject.clone()),
                                        blame: blame.clone(),
                                        contract: (**c).clone(),
                                    },
                                    "Simplify/Intersection/1",
                                ));
                            }
                            if self.sub.ordinary_sub(d, c) {
                                return Some((
                                    Term::Assert {
                                        subject: Box::new(subject.clone()),
                                        blame: blame.clone(),
                                        contract: (**d).clone(),
                                    },
                                    "Simplify/Intersection/2",
                                ));
                            }
                        }
                        _ => {}
                    }
                }
                // Unfold/Assert: route the label through a fresh
                // constraint variable.
                let fresh = self.store.fresh_var();
                self.store
                    .append(blame.clone(), ConstraintDef::Indirect(fresh));
                Some((
                    Term::Assert {
                        subject: Box::new(subject.clone()),
                        blame: BlameRef::Var(fresh),
                        contract: contract.clone(),
                    },
                    "Unfold/Assert",
                ))
            }
            BlameRef::Var(v) => {
                // Verify/True, Verify/False: decide predicates on
                // values at transformation time.
                if matches!(contract, Contract::Flat(_) | Contract::Named(_)) {
                    if let Some(core) = immediate_wrapped_value(subject) {
                        if let Some(truth) = try_verify(contract, core, self.verify_fuel) {
                            let rewritten = Term::Assert {
                                subject: Box::new(subject.clone()),
                                blame: blame.clone(),
                                contract: if truth { Contract::Top } else { Contract::Bot },
                            };
                            return Some((
                                rewritten,
                                if truth { "Verify/True" } else { "Verify/False" },
                            ));
                        }
                    }
                }
                // Convert/True: ⊤ holds by definition.
                if matches!(contract, Contract::Top) {
                    self.store
                        .append(BlameRef::Var(*v), ConstraintDef::Truth(Term::bool(true)));
                    return Some((subject.clone(), "Convert/True"));
                }
                // Push/Immediate and Push/False: move an immediate
                // outside a delayed assertion inward.
                if contract.is_immediate() {
                    if let Term::Assert {
                        subject: inner_subject,
                        blame: inner_blame,
                        contract: inner_contract,
                    } = subject
                    {
                        if inner_contract.is_delayed() {
                            let swapped = Term::Assert {
                                subject: Box::new(Term::Assert {
                                    subject: inner_subject.clone(),
                                    blame: blame.clone(),
                                    contract: contract.clone(),
                                }),
                                blame: inner_blame.clone(),
                                contract: inner_contract.clone(),
                            };
                            let rule = if matches!(contract, Contract::Bot) {
                                "Push/False"
                            } else {
                                "Push/Immediate"
                            };
                            return Some((swapped, rule));
                        }
                    }
                }
                match contract {
                    // Unfold/Union: both alternatives are asserted,
                    // stacked under a ∪ constraint.
                    Contract::Or(c, d) if !self.subset_mode => {
                        let i1 = self.store.fresh_var();
                        let i2 = self.store.fresh_var();
                        self.store
                            .append(BlameRef::Var(*v), ConstraintDef::Or(i1, i2));
                        Some((
                            Term::assert_var(
                                Term::assert_var(subject.clone(), i1, (**c).clone()),
                                i2,
                                (**d).clone(),
                            ),
                            "Unfold/Union",
                        ))
                    }
                    // Unfold/Intersection: an immediate left operand
                    // splits off under a ∩ constraint.
                    Contract::And(l, r) if l.is_immediate() => {
                        let i1 = self.store.fresh_var();
                        let i2 = self.store.fresh_var();
                        self.store
                            .append(BlameRef::Var(*v), ConstraintDef::And(i1, i2));
                        Some((
                            Term::assert_var(
                                Term::assert_var(subject.clone(), i1, (**l).clone()),
                                i2,
                                (**r).clone(),
                            ),
                            "Unfold/Intersection",
                        ))
                    }
                    _ => None,
                }
            }
        }
    }

    fn app_rules(&mut self, f: &Term, a: &Term) -> Option<(Term, &'static str)> {
        if let Term::Assert {
            subject: t1,
            blame: BlameRef::Var(v),
            contract,
        } = f
        {
            match contract {
                // Unfold/D-Function: distribute a function contract at
                // an application site.
                Contract::Func(c, d) => {
                    let i1 = self.store.fresh_var();
                    let i2 = self.store.fresh_var();
                    self.store
                        .append(BlameRef::Var(*v), ConstraintDef::Func(i1, i2));
                    let wrapped_arg = Term::assert_var(a.clone(), i1, (**c).clone());
                    return Some((
                        Term::assert_var(
                            Term::app((**t1).clone(), wrapped_arg),
                            i2,
                            (**d).clone(),
                        ),
                        "Unfold/D-Function",
                    ));
                }
                // Unfold/D-Intersection: split an intersection under
                // an application.
                Contract::And(c, d) if !self.subset_mode => {
                    let i1 = self.store.fresh_var();
                    let i2 = self.store.fresh_var();
                    self.store
                        .append(BlameRef::Var(*v), ConstraintDef::And(i1, i2));
                    return Some((
                        Term::app(
                            Term::assert_var(
                                Term::assert_var((**t1).clone(), i1, (**c).clone()),
                                i2,
                                (**d).clone(),
                            ),
                            a.clone(),
                        ),
                        "Unfold/D-Intersection",
                    ));
                }
                // Unfold/D-Dependent: a dependent contract applied to
                // a statically known value substitutes it into the
                // body, mirroring the run-time rule.
                Contract::Dep(x, body) => {
                    if let Some(core) = bot_wrapped_value(a) {
                        let range = body.substitute(x, core);
                        return Some((
                            Term::Assert {
                                subject: Box::new(Term::app((**t1).clone(), a.clone())),
                                blame: BlameRef::Var(*v),
                                contract: range,
                            },
                            "Unfold/D-Dependent",
                        ));
                    }
                }
                _ => {}
            }
        }
        // Unroll: graft a delayed contract from the argument onto
        // every use of the parameter.
        if let Term::Assert {
            subject: arg_subject,
            blame: blame @ BlameRef::Var(_),
            contract,
        } = a
        {
            if contract.is_delayed() {
                if let Term::Lam(x, body) = strip_bot_wrappers(f) {
                    let grafted = Term::Assert {
                        subject: Box::new(Term::var(x)),
                        blame: blame.clone(),
                        contract: contract.clone(),
                    };
                    let new_body = body.substitute(x, &grafted);
                    let new_lam = rebuild_bot_wrappers(f, Term::lam(x, new_body));
                    return Some((
                        Term::app(new_lam, (**arg_subject).clone()),
                        "Unroll",
                    ));
                }
            }
        }
        None
    }
}

/// Rebuilds the ⊥-wrapper spine of `orig` around a new core.
fn rebuild_bot_wrappers(orig: &Term, core: Term) -> Term {
    match orig {
        Term::Assert {
            subject,
            blame: blame @ BlameRef::Var(_),
            contract: Contract::Bot,
        } => Term::Assert {
            subject: Box::new(rebuild_bot_wrappers(subject, core)),
            blame: blame.clone(),
            contract: Contract::Bot,
        },
        _ => core,
    }
}

/// Pre-order search: the rule anchored closest to the root wins;
/// among children, leftmost first.
fn step_rec(
    stepper: &mut Stepper<'_, '_>,
    t: &Term,
    path: &mut Vec<usize>,
) -> Option<(Term, &'static str, Vec<usize>)> {
    if let Some((t2, rule)) = stepper.apply_here(t) {
        return Some((t2, rule, path.clone()));
    }
    let rebuild = |i: usize,
                   child: &Term,
                   stepper: &mut Stepper<'_, '_>,
                   path: &mut Vec<usize>|
     -> Option<(Term, &'static str, Vec<usize>)> {
        path.push(i);
        let out = step_rec(stepper, child, path);
        path.pop();
        out
    };
    match t {
        Term::Const(_) | Term::Var(_) | Term::Blame(_, _) => None,
        Term::Lam(x, b) => rebuild(0, b, stepper, path)
            .map(|(b2, r, p)| (Term::lam(x, b2), r, p)),
        Term::App(f, a) => rebuild(0, f, stepper, path)
            .map(|(f2, r, p)| (Term::app(f2, (**a).clone()), r, p))
            .or_else(|| {
                rebuild(1, a, stepper, path)
                    .map(|(a2, r, p)| (Term::app((**f).clone(), a2), r, p))
            }),
        Term::Op(op, l, r) => rebuild(0, l, stepper, path)
            .map(|(l2, rule, p)| (Term::op(*op, l2, (**r).clone()), rule, p))
            .or_else(|| {
                rebuild(1, r, stepper, path)
                    .map(|(r2, rule, p)| (Term::op(*op, (**l).clone(), r2), rule, p))
            }),
        Term::If(c, a, b) => rebuild(0, c, stepper, path)
            .map(|(c2, r, p)| (Term::if_(c2, (**a).clone(), (**b).clone()), r, p))
            .or_else(|| {
                rebuild(1, a, stepper, path)
                    .map(|(a2, r, p)| (Term::if_((**c).clone(), a2, (**b).clone()), r, p))
            })
            .or_else(|| {
                rebuild(2, b, stepper, path)
                    .map(|(b2, r, p)| (Term::if_((**c).clone(), (**a).clone(), b2), r, p))
            }),
        Term::Assert {
            subject,
            blame,
            contract,
        } => rebuild(0, subject, stepper, path).map(|(s2, r, p)| {
            (
                Term::Assert {
                    subject: Box::new(s2),
                    blame: blame.clone(),
                    contract: contract.clone(),
                },
                r,
                p,
            )
        }),
        Term::PredEval { value, var, pred } => rebuild(0, value, stepper, path)
            .map(|(v2, r, p)| {
                (
                    Term::PredEval {
                        value: Box::new(v2),
                        var: *var,
                        pred: pred.clone(),
                    },
                    r,
                    p,
                )
            })
            .or_else(|| {
                rebuild(1, pred, stepper, path).map(|(p2, r, p)| {
                    (
                        Term::PredEval {
                            value: value.clone(),
                            var: *var,
                            pred: Box::new(p2),
                        },
                        r,
                        p,
                    )
                })
            }),
        Term::Fork(l, r) => rebuild(0, l, stepper, path)
            .map(|(l2, rule, p)| (Term::Fork(Box::new(l2), r.clone()), rule, p))
            .or_else(|| {
                rebuild(1, r, stepper, path)
                    .map(|(r2, rule, p)| (Term::Fork(l.clone(), Box::new(r2)), rule, p))
            }),
    }
}

/// Applies one baseline step, if any rule fires.
pub fn baseline_step(
    store: &ConstraintStore,
    t: &Term,
    env: &ImplicationEnv,
    cfg: &TransformConfig,
) -> Option<(ConstraintStore, Term, TransformStep)> {
    let mut new_store = store.clone();
    let mut sub = Subcontracting::new(env);
    let before_len = new_store.len();
    let mut stepper = Stepper {
        store: &mut new_store,
        sub: &mut sub,
        verify_fuel: cfg.verify_fuel,
        subset_mode: false,
    };
    let mut path = Vec::new();
    let (after, rule, rpath) = step_rec(&mut stepper, t, &mut path)?;
    let delta = new_store.constraints()[before_len..].to_vec();
    let step = TransformStep {
        rule: rule.into(),
        path: rpath,
        before: t.clone(),
        after: after.clone(),
        store_delta: delta,
    };
    Some((new_store, after, step))
}

/// One step of the baseline rules restricted as required by the
/// subset transformation (no Unfold/Union, Unfold/D-Intersection,
/// Push/If, or Lower), applied pre-order. Used as the shared middle
/// tier of the subset stepper, which owns the store and session.
pub(crate) fn step_restricted(
    store: &mut ConstraintStore,
    sub: &mut Subcontracting<'_>,
    t: &Term,
    verify_fuel: u64,
) -> Option<(Term, &'static str, Vec<usize>)> {
    let mut stepper = Stepper {
        store,
        sub,
        verify_fuel,
        subset_mode: true,
    };
    let mut path = Vec::new();
    step_rec(&mut stepper, t, &mut path)
}

/// Drives the baseline transformation to canonical form.
pub fn baseline_normalize(
    store: ConstraintStore,
    t: Term,
    env: &ImplicationEnv,
    cfg: &TransformConfig,
) -> Result<(ConstraintStore, Term, Vec<TransformStep>), TransformError> {
    let mut store = store;
    let mut term = normalize_contracts(t);
    let mut sub = Subcontracting::new(env);
    let mut trace = Vec::new();
    for _ in 0..cfg.step_cap {
        let before_len = store.len();
        let mut stepper = Stepper {
            store: &mut store,
            sub: &mut sub,
            verify_fuel: cfg.verify_fuel,
            subset_mode: false,
        };
        let mut path = Vec::new();
        match step_rec(&mut stepper, &term, &mut path) {
            Some((after, rule, rpath)) => {
                trace.push(TransformStep {
                    rule: rule.into(),
                    path: rpath,
                    before: term.clone(),
                    after: after.clone(),
                    store_delta: store.constraints()[before_len..].to_vec(),
                });
                term = after;
            }
            None => return Ok((store, term, trace)),
        }
    }
    Err(TransformError::StepBudgetExceeded { cap: cfg.step_cap })
}

// ---------------------------------------------------------------------------
// Canonical-form grammar
// ---------------------------------------------------------------------------

/// Grammar-based canonicity check, independent of the stepper. Flat
/// predicates on values count as canonical only when transformation-
/// time verification cannot decide them.
pub fn is_canonical_baseline(t: &Term) -> BaselineCanonicity {
    is_canonical_baseline_with(t, &TransformConfig::default())
}

pub fn is_canonical_baseline_with(t: &Term, cfg: &TransformConfig) -> BaselineCanonicity {
    let g = Grammar {
        verify_fuel: cfg.verify_fuel,
    };
    if g.is_tq(t) {
        return BaselineCanonicity::Canonical;
    }
    // Diagnose by replaying the stepper against a scratch store (rule
    // applicability never reads the store).
    match baseline_step(
        &ConstraintStore::new(),
        t,
        &ImplicationEnv::standard(),
        cfg,
    ) {
        Some((_, _, step)) => BaselineCanonicity::Transformable {
            rule: step.rule,
            path: step.path,
        },
        None => BaselineCanonicity::Transformable {
            rule: "unknown".into(),
            path: Vec::new(),
        },
    }
}

struct Grammar {
    verify_fuel: u64,
}

impl Grammar {
    /// A wrapper that is allowed to remain on a value: ⊥, or a flat
    /// predicate the bounded verifier cannot decide.
    fn residual_value_wrapper(&self, c: &Contract, core: &Term) -> bool {
        match c {
            Contract::Bot => true,
            Contract::Flat(_) => try_verify(c, core, self.verify_fuel).is_none(),
            _ => false,
        }
    }

    /// T_Val: a canonical value under residual wrappers.
    fn is_tval(&self, t: &Term) -> bool {
        let Some(core) = immediate_wrapped_value(t) else {
            return false;
        };
        if !self.is_sval(core) {
            return false;
        }
        let mut cur = t;
        while let Term::Assert {
            subject, contract, ..
        } = cur
        {
            if !self.residual_value_wrapper(contract, core) {
                return false;
            }
            cur = subject;
        }
        true
    }

    /// A value strictly under ⊥ wrappers (the 𝓥 context proper).
    fn is_strict_bot_value(&self, t: &Term) -> bool {
        bot_wrapped_value(t).is_some_and(|core| self.is_sval(core))
    }

    /// T_I: a canonical non-value under immediate wrappers (⊤ never
    /// remains: Convert/True removes it).
    fn is_ti(&self, t: &Term) -> bool {
        let mut cur = t;
        loop {
            match cur {
                Term::Assert {
                    subject,
                    blame: BlameRef::Var(_),
                    contract,
                } if contract.is_immediate() && !matches!(contract, Contract::Top) => {
                    cur = subject;
                }
                _ => break,
            }
        }
        self.is_snonval(cur)
    }

    /// T_Q: T_Val or T_I under delayed wrappers.
    fn is_tq(&self, t: &Term) -> bool {
        let mut cur = t;
        while let Term::Assert {
            subject,
            blame: BlameRef::Var(_),
            contract,
        } = cur
        {
            if !contract.is_delayed() {
                break;
            }
            cur = subject;
        }
        self.is_tval(cur) || self.is_ti(cur)
    }

    fn is_tnonq(&self, t: &Term) -> bool {
        self.is_tval(t) || self.is_ti(t)
    }

    fn is_s(&self, t: &Term) -> bool {
        self.is_sval(t) || self.is_snonval(t)
    }

    fn is_sval(&self, t: &Term) -> bool {
        match t {
            Term::Const(_) => true,
            Term::Lam(_, b) => self.is_s(b),
            _ => false,
        }
    }

    fn is_snonval(&self, t: &Term) -> bool {
        match t {
            Term::Var(_) | Term::Blame(_, _) => true,
            Term::App(f, a) => self.app_canonical(f, a),
            Term::Op(_, l, r) => self.is_tnonq(l) && self.is_tnonq(r),
            Term::If(c, t1, t2) => {
                if !(self.is_tq(c) && self.is_tq(t1) && self.is_tq(t2)) {
                    return false;
                }
                // Push/If would hoist identical assertions.
                !matches!(
                    (&**t1, &**t2),
                    (
                        Term::Assert {
                            blame: b1 @ BlameRef::Var(_),
                            contract: c1,
                            ..
                        },
                        Term::Assert {
                            blame: b2,
                            contract: c2,
                            ..
                        },
                    ) if b1 == b2 && c1 == c2
                )
            }
            Term::PredEval { value, pred, .. } => self.is_tq(value) && self.is_tq(pred),
            Term::Fork(l, r) => self.is_tq(l) && self.is_tq(r),
            _ => false,
        }
    }

    fn app_canonical(&self, f: &Term, a: &Term) -> bool {
        // Function position classes, by outermost wrapper.
        if self.is_ti(f) {
            return self.is_tq(a);
        }
        if self.is_tval(f) {
            let strictly_bot = self.is_strict_bot_value(f);
            return match bot_wrapped_value(f) {
                // T_Const T: applying a constant is stuck but canonical.
                Some(Term::Const(_)) => self.is_tq(a),
                _ if strictly_bot => {
                    // Pure 𝓥[λ]: Unroll consumes delayed-asserted
                    // arguments, so only T_I / T_Val remain.
                    self.is_ti(a) || self.is_tval(a)
                }
                // A lambda under an undecidable flat wrapper: Unroll
                // cannot see through it, so any argument stays.
                _ => self.is_tq(a),
            };
        }
        // A delayed-wrapped function: Func and ∩ wrappers always
        // transform at an application; a dependent wrapper transforms
        // only for statically known value arguments.
        if let Term::Assert {
            blame: BlameRef::Var(_),
            contract: Contract::Dep(_, _),
            ..
        } = f
        {
            return self.is_tq(f) && self.is_tq(a) && !self.is_strict_bot_value(a);
        }
        false
    }
}
