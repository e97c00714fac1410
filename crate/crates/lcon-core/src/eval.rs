//! Small-step call-by-value interpreter for λ_Con.
//!
//! The step relation works on configurations `(ς, M)`: a constraint
//! store plus a term. Contract assertions generate constraints as they
//! decompose; the blame-aware relation ⟹ behaves like the plain step
//! relation unless the store is a blame state, in which case evaluation
//! stops and signals the violation.
//!
//! The interpreter counts *predicate checks*: firings of rule Flat
//! (one per flat contract evaluated against a value). This is the size
//! metric the static transformations are meant to improve. The ⊤/⊥
//! shortcut rules (Reduce/True, Reduce/False, D-Domain, D-Range,
//! D-False) and the structural rules create constraints but perform no
//! predicate check.

use alloc::boxed::Box;

use crate::ast::{BlameRef, Constant, Contract, Label, Op, Polarity, Term};
use crate::constraint::{ConstraintDef, ConstraintStore};

/// Evaluator knobs.
#[derive(Debug, Clone, Copy)]
pub struct EvalConfig {
    /// Maximum number of small steps before giving up.
    pub fuel: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { fuel: 1_000_000 }
    }
}

/// Result of running a program to completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    /// Evaluation reached a value with no blame state.
    Value {
        value: Term,
        store: ConstraintStore,
        checks: u64,
    },
    /// Evaluation stopped in a blame state (or reached a blame term).
    Blame {
        label: Label,
        polarity: Polarity,
        store: ConstraintStore,
        checks: u64,
    },
    /// No rule applies (e.g. applying a constant, a free variable, a
    /// fork during evaluation).
    Stuck {
        term: Term,
        store: ConstraintStore,
        checks: u64,
    },
    /// The step budget ran out.
    OutOfFuel {
        term: Term,
        store: ConstraintStore,
        checks: u64,
    },
}

impl Outcome {
    pub fn checks(&self) -> u64 {
        match self {
            Outcome::Value { checks, .. }
            | Outcome::Blame { checks, .. }
            | Outcome::Stuck { checks, .. }
            | Outcome::OutOfFuel { checks, .. } => *checks,
        }
    }

    pub fn store(&self) -> &ConstraintStore {
        match self {
            Outcome::Value { store, .. }
            | Outcome::Blame { store, .. }
            | Outcome::Stuck { store, .. }
            | Outcome::OutOfFuel { store, .. } => store,
        }
    }

    pub fn is_value(&self) -> bool {
        matches!(self, Outcome::Value { .. })
    }

    pub fn is_blame(&self) -> bool {
        matches!(self, Outcome::Blame { .. })
    }
}

/// Outcome of attempting one small step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepResult {
    /// One rule fired.
    Stepped(Term),
    /// The redex position holds a blame term; the whole program stops.
    Aborted(Label, Polarity),
    /// The term is a value; nothing to do.
    Value,
    /// No rule applies.
    Stuck,
}

/// δ_op on bare λ_J values. `+` is overloaded for string
/// concatenation; comparisons are integer-only. Everything else
/// (including integer overflow) is undefined and leaves the program
/// stuck.
fn delta(op: Op, a: &Term, b: &Term) -> Option<Term> {
    use Constant::*;
    match (op, a, b) {
        (Op::Add, Term::Const(Int(x)), Term::Const(Int(y))) => x.checked_add(*y).map(Term::int),
        (Op::Sub, Term::Const(Int(x)), Term::Const(Int(y))) => x.checked_sub(*y).map(Term::int),
        (Op::Mul, Term::Const(Int(x)), Term::Const(Int(y))) => x.checked_mul(*y).map(Term::int),
        (Op::Add, Term::Const(Str(x)), Term::Const(Str(y))) => {
            let mut s = x.clone();
            s.push_str(y);
            Some(Term::Const(Str(s)))
        }
        (Op::Eq, Term::Const(Int(x)), Term::Const(Int(y))) => Some(Term::bool(x == y)),
        (Op::Lt, Term::Const(Int(x)), Term::Const(Int(y))) => Some(Term::bool(x < y)),
        (Op::Gt, Term::Const(Int(x)), Term::Const(Int(y))) => Some(Term::bool(x > y)),
        (Op::Le, Term::Const(Int(x)), Term::Const(Int(y))) => Some(Term::bool(x <= y)),
        (Op::Ge, Term::Const(Int(x)), Term::Const(Int(y))) => Some(Term::bool(x >= y)),
        _ => None,
    }
}

/// True if the value is a delayed-contract wrapper (strippable by
/// D-Op / D-If).
fn is_wrapper(t: &Term) -> bool {
    matches!(t, Term::Assert { .. })
}

fn strip_one(t: &Term) -> Term {
    match t {
        Term::Assert { subject, .. } => (**subject).clone(),
        other => other.clone(),
    }
}

/// Steps into a subterm in evaluation position, aborting on blame
/// terms.
fn step_child(store: &mut ConstraintStore, t: &Term, checks: &mut u64) -> StepResult {
    if let Term::Blame(l, p) = t {
        return StepResult::Aborted(l.clone(), *p);
    }
    step_once(store, t, checks)
}

macro_rules! stepped_or_return {
    ($e:expr) => {
        match $e {
            StepResult::Stepped(t) => t,
            other => return other,
        }
    };
}

/// Attempts one small step at the leftmost redex. `checks` is
/// incremented exactly when rule Flat fires.
pub fn step_once(store: &mut ConstraintStore, t: &Term, checks: &mut u64) -> StepResult {
    match t {
        Term::Const(_) | Term::Lam(_, _) => StepResult::Value,
        Term::Var(_) => StepResult::Stuck,
        Term::Blame(l, p) => StepResult::Aborted(l.clone(), *p),
        Term::Fork(_, _) => StepResult::Stuck,

        Term::App(f, a) => {
            if !f.is_value() {
                let f2 = stepped_or_return!(step_child(store, f, checks));
                return StepResult::Stepped(Term::App(Box::new(f2), a.clone()));
            }
            if !a.is_value() {
                let a2 = stepped_or_return!(step_child(store, a, checks));
                return StepResult::Stepped(Term::App(f.clone(), Box::new(a2)));
            }
            match &**f {
                // Beta.
                Term::Lam(x, body) => StepResult::Stepped(body.substitute(x, a)),
                // A value wrapped in a delayed contract, applied.
                Term::Assert {
                    subject,
                    blame: BlameRef::Var(iota),
                    contract,
                } => apply_wrapped(store, subject, *iota, contract, a),
                _ => StepResult::Stuck,
            }
        }

        Term::Op(op, a, b) => {
            if !a.is_value() {
                let a2 = stepped_or_return!(step_child(store, a, checks));
                return StepResult::Stepped(Term::Op(*op, Box::new(a2), b.clone()));
            }
            if !b.is_value() {
                let b2 = stepped_or_return!(step_child(store, b, checks));
                return StepResult::Stepped(Term::Op(*op, a.clone(), Box::new(b2)));
            }
            // D-Op: built-in operations see through contracts, one
            // wrapper per step, left to right.
            if is_wrapper(a) {
                return StepResult::Stepped(Term::Op(*op, Box::new(strip_one(a)), b.clone()));
            }
            if is_wrapper(b) {
                return StepResult::Stepped(Term::Op(*op, a.clone(), Box::new(strip_one(b))));
            }
            match delta(*op, a, b) {
                Some(r) => StepResult::Stepped(r),
                None => StepResult::Stuck,
            }
        }

        Term::If(c, then, els) => {
            if !c.is_value() {
                let c2 = stepped_or_return!(step_child(store, c, checks));
                return StepResult::Stepped(Term::If(Box::new(c2), then.clone(), els.clone()));
            }
            // D-If: the condition sees through contracts.
            if is_wrapper(c) {
                return StepResult::Stepped(Term::If(
                    Box::new(strip_one(c)),
                    then.clone(),
                    els.clone(),
                ));
            }
            match &**c {
                Term::Const(Constant::Bool(true)) => StepResult::Stepped((**then).clone()),
                Term::Const(Constant::Bool(false)) => StepResult::Stepped((**els).clone()),
                _ => StepResult::Stuck,
            }
        }

        Term::Assert {
            subject,
            blame,
            contract,
        } => {
            if !subject.is_value() {
                let s2 = stepped_or_return!(step_child(store, subject, checks));
                return StepResult::Stepped(Term::Assert {
                    subject: Box::new(s2),
                    blame: blame.clone(),
                    contract: contract.clone(),
                });
            }
            match blame {
                // Assert: a label assertion gets a fresh blame variable.
                BlameRef::Label(l) => {
                    let iota = store.fresh_var();
                    store.append(BlameRef::Label(l.clone()), ConstraintDef::Indirect(iota));
                    StepResult::Stepped(Term::Assert {
                        subject: subject.clone(),
                        blame: BlameRef::Var(iota),
                        contract: contract.clone(),
                    })
                }
                BlameRef::Var(iota) => assert_value(store, subject, *iota, contract, checks),
            }
        }

        Term::PredEval { value, var, pred } => {
            if !pred.is_value() {
                let p2 = stepped_or_return!(step_child(store, pred, checks));
                return StepResult::Stepped(Term::PredEval {
                    value: value.clone(),
                    var: *var,
                    pred: Box::new(p2),
                });
            }
            // Unit: record the predicate's verdict, yield the value.
            store.append(BlameRef::Var(*var), ConstraintDef::Truth((**pred).clone()));
            StepResult::Stepped((**value).clone())
        }
    }
}

/// Dispatch for `assert V ι C` with a value subject.
fn assert_value(
    store: &mut ConstraintStore,
    v: &Term,
    iota: u32,
    contract: &Contract,
    checks: &mut u64,
) -> StepResult {
    match contract {
        // Reduce/True and Reduce/False: nothing to check, record the
        // verdict and strip.
        Contract::Top => {
            store.append(BlameRef::Var(iota), ConstraintDef::Truth(Term::bool(true)));
            StepResult::Stepped(v.clone())
        }
        Contract::Bot => {
            store.append(BlameRef::Var(iota), ConstraintDef::Truth(Term::bool(false)));
            StepResult::Stepped(v.clone())
        }
        // Flat: start evaluating the predicate on the unwrapped value.
        Contract::Flat(pred) => {
            *checks += 1;
            StepResult::Stepped(Term::PredEval {
                value: Box::new(v.clone()),
                var: iota,
                pred: Box::new(Term::app((**pred).clone(), v.unwrap_value().clone())),
            })
        }
        Contract::Named(p) => {
            *checks += 1;
            StepResult::Stepped(Term::PredEval {
                value: Box::new(v.clone()),
                var: iota,
                pred: Box::new(Term::bool(p.holds(v.unwrap_value()))),
            })
        }
        // Union: split now; the subject may satisfy either side.
        Contract::Or(c, d) => {
            let i1 = store.fresh_var();
            let i2 = store.fresh_var();
            store.append(BlameRef::Var(iota), ConstraintDef::Or(i1, i2));
            StepResult::Stepped(Term::assert_var(
                Term::assert_var(v.clone(), i1, (**c).clone()),
                i2,
                (**d).clone(),
            ))
        }
        Contract::And(i, c) if !contract.is_delayed() => {
            // Intersection (I ∩ C): check the immediate part now.
            let i1 = store.fresh_var();
            let i2 = store.fresh_var();
            store.append(BlameRef::Var(iota), ConstraintDef::And(i1, i2));
            StepResult::Stepped(Term::assert_var(
                Term::assert_var(v.clone(), i1, (**i).clone()),
                i2,
                (**c).clone(),
            ))
        }
        // Delayed contracts wrap the value; the wrapper is itself a
        // value, so no rule applies here (is_value filtered earlier).
        Contract::Func(_, _) | Contract::Dep(_, _) | Contract::And(_, _) => StepResult::Value,
    }
}

/// Dispatch for `(assert V ι Q) W`: elimination of a delayed contract
/// at an application.
fn apply_wrapped(
    store: &mut ConstraintStore,
    v: &Term,
    iota: u32,
    contract: &Contract,
    w: &Term,
) -> StepResult {
    match contract {
        Contract::Func(dom, rng) => {
            match (&**dom, &**rng) {
                // D-False: an unsatisfiable range; record and proceed.
                (Contract::Top, Contract::Bot) => {
                    store.append(BlameRef::Var(iota), ConstraintDef::Truth(Term::bool(false)));
                    StepResult::Stepped(Term::app(v.clone(), w.clone()))
                }
                // D-Domain: only the domain needs monitoring; a domain
                // violation blames this contract's context.
                (c, Contract::Top) => {
                    let i1 = store.fresh_var();
                    store.append(BlameRef::Var(iota), ConstraintDef::Not(i1));
                    StepResult::Stepped(Term::app(
                        v.clone(),
                        Term::assert_var(w.clone(), i1, c.clone()),
                    ))
                }
                // D-Range: only the range needs monitoring.
                (Contract::Top, d) => {
                    let i1 = store.fresh_var();
                    store.append(BlameRef::Var(iota), ConstraintDef::Indirect(i1));
                    StepResult::Stepped(Term::assert_var(
                        Term::app(v.clone(), w.clone()),
                        i1,
                        d.clone(),
                    ))
                }
                // D-Function.
                (c, d) => {
                    let i1 = store.fresh_var();
                    let i2 = store.fresh_var();
                    store.append(BlameRef::Var(iota), ConstraintDef::Func(i1, i2));
                    StepResult::Stepped(Term::assert_var(
                        Term::app(v.clone(), Term::assert_var(w.clone(), i1, c.clone())),
                        i2,
                        d.clone(),
                    ))
                }
            }
        }
        // D-Dependent: substitute the unwrapped argument into the
        // contract body and keep monitoring under the same identifier.
        Contract::Dep(x, body) => StepResult::Stepped(Term::assert_var(
            Term::app(v.clone(), w.clone()),
            iota,
            body.substitute(x, w.unwrap_value()),
        )),
        // D-Intersection: the context choice happens per use.
        Contract::And(q, r) => {
            let i1 = store.fresh_var();
            let i2 = store.fresh_var();
            store.append(BlameRef::Var(iota), ConstraintDef::And(i1, i2));
            StepResult::Stepped(Term::app(
                Term::assert_var(
                    Term::assert_var(v.clone(), i1, (**q).clone()),
                    i2,
                    (**r).clone(),
                ),
                w.clone(),
            ))
        }
        _ => StepResult::Stuck,
    }
}

/// Runs a term against an existing store (used for transformed
/// programs, whose evaluation continues from the transformation's
/// final store). Checks for a blame state before every step and once
/// more after the last one.
pub fn run_from(mut store: ConstraintStore, term: Term, config: &EvalConfig) -> Outcome {
    if let Some(max) = max_blame_var(&term) {
        store.reserve_through(max);
    }
    let mut term = term;
    let mut checks: u64 = 0;
    let mut fuel = config.fuel;
    // Only re-solve when the store has changed.
    let mut dirty = true;
    loop {
        if dirty {
            if let Some((label, polarity)) = store.blame_state() {
                return Outcome::Blame {
                    label,
                    polarity,
                    store,
                    checks,
                };
            }
        }
        if term.is_value() {
            return Outcome::Value {
                value: term,
                store,
                checks,
            };
        }
        if fuel == 0 {
            return Outcome::OutOfFuel { term, store, checks };
        }
        fuel -= 1;
        let before = store.len();
        match step_once(&mut store, &term, &mut checks) {
            StepResult::Stepped(next) => {
                dirty = store.len() != before;
                term = next;
            }
            StepResult::Aborted(label, polarity) => {
                return Outcome::Blame {
                    label,
                    polarity,
                    store,
                    checks,
                }
            }
            StepResult::Value => {
                return Outcome::Value {
                    value: term,
                    store,
                    checks,
                }
            }
            StepResult::Stuck => return Outcome::Stuck { term, store, checks },
        }
    }
}

/// Runs a program from an empty store.
pub fn run(term: &Term, config: &EvalConfig) -> Outcome {
    run_from(ConstraintStore::new(), term.clone(), config)
}

/// The largest blame variable occurring anywhere in a term (asserts,
/// running checks, and contract bodies), used to seed the fresh-name
/// supply when evaluating terms with pre-existing variables.
pub fn max_blame_var(t: &Term) -> Option<u32> {
    fn go(t: &Term, max: &mut Option<u32>) {
        let mut bump = |v: u32| {
            *max = Some(max.map_or(v, |m| m.max(v)));
        };
        match t {
            Term::Const(_) | Term::Var(_) | Term::Blame(_, _) => {}
            Term::Lam(_, b) => go(b, max),
            Term::App(a, b) | Term::Op(_, a, b) | Term::Fork(a, b) => {
                go(a, max);
                go(b, max);
            }
            Term::If(c, a, b) => {
                go(c, max);
                go(a, max);
                go(b, max);
            }
            Term::Assert {
                subject,
                blame,
                contract,
            } => {
                if let BlameRef::Var(v) = blame {
                    bump(*v);
                }
                go(subject, max);
                go_contract(contract, max);
            }
            Term::PredEval { value, var, pred } => {
                bump(*var);
                go(value, max);
                go(pred, max);
            }
        }
    }
    fn go_contract(c: &Contract, max: &mut Option<u32>) {
        match c {
            Contract::Flat(m) => go(m, max),
            Contract::Named(_) | Contract::Top | Contract::Bot => {}
            Contract::Func(a, b) | Contract::And(a, b) | Contract::Or(a, b) => {
                go_contract(a, max);
                go_contract(b, max);
            }
            Contract::Dep(_, b) => go_contract(b, max),
        }
    }
    let mut max = None;
    go(t, &mut max);
    max
}

/// Removes every contract annotation from a term (for the
/// contract-erasure property: contracts never change values).
pub fn erase_contracts(t: &Term) -> Term {
    match t {
        Term::Const(_) | Term::Var(_) | Term::Blame(_, _) => t.clone(),
        Term::Lam(x, b) => Term::Lam(x.clone(), Box::new(erase_contracts(b))),
        Term::App(a, b) => Term::app(erase_contracts(a), erase_contracts(b)),
        Term::Op(op, a, b) => Term::op(*op, erase_contracts(a), erase_contracts(b)),
        Term::If(c, a, b) => {
            Term::if_(erase_contracts(c), erase_contracts(a), erase_contracts(b))
        }
        Term::Assert { subject, .. } => erase_contracts(subject),
        Term::PredEval { value, .. } => erase_contracts(value),
        Term::Fork(a, _) => erase_contracts(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::NamedPred;
    use crate::syntax::parse_term;

    fn run_str(src: &str) -> Outcome {
        run(&parse_term(src).unwrap(), &EvalConfig::default())
    }

    fn expect_value(src: &str) -> (Term, ConstraintStore, u64) {
        match run_str(src) {
            Outcome::Value {
                value,
                store,
                checks,
            } => (value, store, checks),
            other => panic!("expected value for {src}, got {other:?}"),
        }
    }

    fn expect_blame(src: &str) -> (Label, Polarity, u64) {
        match run_str(src) {
            Outcome::Blame {
                label,
                polarity,
                checks,
                ..
            } => (label, polarity, checks),
            other => panic!("expected blame for {src}, got {other:?}"),
        }
    }

    #[test]
    fn beta_and_op() {
        let (v, _, checks) = expect_value("((lam x (+ x 1)) 2)");
        assert_eq!(v, Term::int(3));
        assert_eq!(checks, 0);
    }

    #[test]
    fn string_concatenation() {
        let (v, _, _) = expect_value("(+ \"foo\" \"bar\")");
        assert_eq!(v, Term::str("foobar"));
    }

    #[test]
    fn comparison_ops() {
        let (v, _, _) = expect_value("(if (< 1 2) 10 20)");
        assert_eq!(v, Term::int(10));
        let (v, _, _) = expect_value("(if (>= 2 2) 10 20)");
        assert_eq!(v, Term::int(10));
    }

    #[test]
    fn flat_assert_counts_one_check() {
        let (v, store, checks) = expect_value("(assert 1 #l Number?)");
        assert_eq!(v, Term::int(1));
        assert_eq!(checks, 1);
        // Assert adds #l <- @1; Unit adds @1 <- true.
        assert_eq!(store.dump(), "#l <- @1\n@1 <- true\n");
    }

    #[test]
    fn custom_flat_predicate_evaluates() {
        let (v, _, checks) = expect_value("(assert 7 #l (flat (lam v (> v 0))))");
        assert_eq!(v, Term::int(7));
        assert_eq!(checks, 1);
    }

    #[test]
    fn failing_flat_blames_subject() {
        let (l, p, checks) = expect_blame("(assert 0 #l Positive?)");
        assert_eq!((l.as_str(), p), ("l", Polarity::Positive));
        assert_eq!(checks, 1);
    }

    #[test]
    fn function_contract_monitors_domain_and_range() {
        // Range predicate on 0 fails: subject blame.
        let (l, p, _) = expect_blame("((assert (lam x 0) #l (-> Natural? Positive?)) 1)");
        assert_eq!((l.as_str(), p), ("l", Polarity::Positive));
        // Domain failure: context blame.
        let (l, p, _) = expect_blame("((assert (lam x x) #l (-> Positive? Positive?)) 0)");
        assert_eq!((l.as_str(), p), ("l", Polarity::Negative));
        // Both checks pass.
        let (v, _, checks) = expect_value("((assert (lam x (+ x 1)) #l (-> Positive? Positive?)) 2)");
        assert_eq!(v, Term::int(3));
        assert_eq!(checks, 2);
    }

    #[test]
    fn bad_argument_excuses_bad_result() {
        // Lax partial correctness: the function misbehaves only on a
        // bad input, so the context is blamed, not the subject.
        let (l, p, _) = expect_blame("((assert (lam x 0) #l (-> Positive? Positive?)) 0)");
        assert_eq!((l.as_str(), p), ("l", Polarity::Negative));
    }

    #[test]
    fn d_function_constraint_shape() {
        let mut store = ConstraintStore::new();
        store.reserve_through(1);
        let mut checks = 0;
        let t = parse_term("((assert (lam x x) @1 (-> Positive? Positive?)) 0)").unwrap();
        let StepResult::Stepped(t2) = step_once(&mut store, &t, &mut checks) else {
            panic!()
        };
        assert_eq!(store.dump(), "@1 <- (-> @2 @3)\n");
        assert_eq!(
            crate::syntax::print_term(&t2),
            "(assert ((lam x x) (assert 0 @2 Positive?)) @3 Positive?)"
        );
    }

    #[test]
    fn union_splits_with_union_constraint() {
        let (v, store, checks) = expect_value("(assert 5 #l (cup String? Number?))");
        assert_eq!(v, Term::int(5));
        assert_eq!(checks, 2);
        // #l <- @1, @1 <- (cup @2 @3), @2 <- false (String? on 5),
        // @3 <- true.
        assert_eq!(
            store.dump(),
            "#l <- @1\n@1 <- (cup @2 @3)\n@2 <- false\n@3 <- true\n"
        );
        assert_eq!(store.blame_state(), None);
    }

    #[test]
    fn union_blames_only_when_both_sides_fail() {
        let (l, p, checks) = expect_blame("(assert true #l (cup String? Number?))");
        assert_eq!((l.as_str(), p), ("l", Polarity::Positive));
        assert_eq!(checks, 2);
    }

    #[test]
    fn intersection_of_immediates_checks_both() {
        let (v, _, checks) = expect_value("(assert 5 #l (cap Number? Positive?))");
        assert_eq!(v, Term::int(5));
        assert_eq!(checks, 2);
        let (l, p, _) = expect_blame("(assert 0 #l (cap Number? Positive?))");
        assert_eq!((l.as_str(), p), ("l", Polarity::Positive));
    }

    #[test]
    fn delayed_intersection_lets_context_choose() {
        // The context picks the Number? side; the String? side's domain
        // failure must not blame anyone.
        let src = "(((assert (lam x (lam y (+ x y))) #p \
                     (cap (-> Number? (-> Number? Number?)) (-> String? (-> String? String?)))) 5) 1)";
        let (v, _, checks) = expect_value(src);
        assert_eq!(v.unwrap_value(), &Term::int(6));
        assert_eq!(checks, 6);
    }

    #[test]
    fn dependent_contract_substitutes_argument() {
        // Result must be greater than the argument.
        let src = "((assert (lam x (* x 2)) #d (dep (lam a (flat (lam r (> r a)))))) 3)";
        let (v, _, checks) = expect_value(src);
        assert_eq!(v.unwrap_value(), &Term::int(6));
        assert_eq!(checks, 1);
        let bad = "((assert (lam x (* x 0)) #d (dep (lam a (flat (lam r (> r a)))))) 3)";
        let (l, p, _) = match run_str(bad) {
            Outcome::Blame {
                label, polarity, ..
            } => (label, polarity, ()),
            other => panic!("expected blame, got {other:?}"),
        };
        assert_eq!((l.as_str(), p), ("d", Polarity::Positive));
    }

    #[test]
    fn d_if_and_d_op_see_through_contracts() {
        let (v, store, checks) = expect_value("(if (assert true #l (-> top top)) 1 2)");
        assert_eq!(v, Term::int(1));
        // Assert still fires (#l <- @1) but no predicate is checked and
        // no outcome constraint appears.
        assert_eq!(checks, 0);
        assert_eq!(store.dump(), "#l <- @1\n");
        let (v, _, checks) = expect_value("(+ (assert 2 #l (-> top top)) 3)");
        assert_eq!(v, Term::int(5));
        assert_eq!(checks, 0);
    }

    #[test]
    fn top_and_bot_shortcuts() {
        let (v, store, checks) = expect_value("(assert 1 @1 top)");
        assert_eq!(v, Term::int(1));
        assert_eq!(checks, 0);
        assert_eq!(store.dump(), "@1 <- true\n");
        // A bare ⊥ on a variable with no label root is recorded but
        // cannot blame (no source label).
        let (v, store, checks) = expect_value("(assert 1 @1 bot)");
        assert_eq!(v, Term::int(1));
        assert_eq!(checks, 0);
        assert_eq!(store.dump(), "@1 <- false\n");
        // Under a label it blames.
        let (l, p, checks) = expect_blame("(assert 1 #l bot)");
        assert_eq!((l.as_str(), p), ("l", Polarity::Positive));
        assert_eq!(checks, 0);
    }

    #[test]
    fn d_domain_d_range_d_false() {
        // D-Domain: domain-only contract; violation blames the context.
        let (l, p, _) = expect_blame("((assert (lam x x) #l (-> Positive? top)) 0)");
        assert_eq!((l.as_str(), p), ("l", Polarity::Negative));
        // D-Range: range-only contract; violation blames the subject.
        let (l, p, _) = expect_blame("((assert (lam x 0) #l (-> top Positive?)) 5)");
        assert_eq!((l.as_str(), p), ("l", Polarity::Positive));
        // D-False: applying a (top -> bot) function blames the subject
        // without any predicate check.
        let (l, p, checks) = expect_blame("((assert (lam x x) #l (-> top bot)) 5)");
        assert_eq!((l.as_str(), p), ("l", Polarity::Positive));
        assert_eq!(checks, 0);
        // D-Domain constraint is an inversion.
        let mut store = ConstraintStore::new();
        store.reserve_through(1);
        let mut checks = 0;
        let t = parse_term("((assert (lam x x) @1 (-> Positive? top)) 0)").unwrap();
        step_once(&mut store, &t, &mut checks);
        assert_eq!(store.dump(), "@1 <- (not @2)\n");
    }

    #[test]
    fn blame_term_aborts_evaluation() {
        let out = run_str("(+ 1 (blame #l -))");
        match out {
            Outcome::Blame {
                label, polarity, ..
            } => assert_eq!((label.as_str(), polarity), ("l", Polarity::Negative)),
            other => panic!("expected blame, got {other:?}"),
        }
    }

    #[test]
    fn stuck_terms() {
        assert!(matches!(run_str("(1 2)"), Outcome::Stuck { .. }));
        assert!(matches!(run_str("(= \"a\" \"b\")"), Outcome::Stuck { .. }));
        assert!(matches!(run_str("x"), Outcome::Stuck { .. }));
    }

    #[test]
    fn out_of_fuel_on_divergence() {
        let omega = "((lam x (x x)) (lam x (x x)))";
        let out = run(&parse_term(omega).unwrap(), &EvalConfig { fuel: 100 });
        assert!(matches!(out, Outcome::OutOfFuel { .. }));
    }

    #[test]
    fn named_predicates_are_total_on_lambdas() {
        let (l, p, _) = expect_blame("(assert (lam x x) #l Number?)");
        assert_eq!((l.as_str(), p), ("l", Polarity::Positive));
        assert!(!NamedPred::Number.holds(&Term::lam("x", Term::var("x"))));
    }

    #[test]
    fn contract_erasure_preserves_values() {
        let samples = [
            "(assert 1 #l Number?)",
            "((assert (lam x (+ x 1)) #l (-> Number? Number?)) 2)",
            "(assert 5 #l (cup String? Number?))",
        ];
        for src in samples {
            let t = parse_term(src).unwrap();
            let with = run(&t, &EvalConfig::default());
            let without = run(&erase_contracts(&t), &EvalConfig::default());
            match (&with, &without) {
                (Outcome::Value { value: a, .. }, Outcome::Value { value: b, .. }) => {
                    assert_eq!(a.unwrap_value(), b.unwrap_value(), "mismatch for {src}");
                }
                other => panic!("expected two values for {src}, got {other:?}"),
            }
        }
    }

    #[test]
    fn transformed_programs_resume_from_the_transformation_store() {
        // A pre-seeded store with a violated label stops immediately.
        let mut store = ConstraintStore::new();
        store.append(BlameRef::Label("l".into()), ConstraintDef::Indirect(1));
        store.append(BlameRef::Var(1), ConstraintDef::Truth(Term::bool(false)));
        let out = run_from(store, Term::int(42), &EvalConfig::default());
        assert!(matches!(out, Outcome::Blame { .. }));
    }

    #[test]
    fn addone1_call_counts_three_checks() {
        let src = "(((lam plus (lam z ((plus 1) z))) \
                     (assert (lam x (lam y (+ x y))) #p (-> Number? (-> Number? Number?)))) 5)";
        let (v, _, checks) = expect_value(src);
        assert_eq!(v.unwrap_value(), &Term::int(6));
        assert_eq!(checks, 3);
    }

    #[test]
    fn addone2_call_counts_six_checks() {
        let src = "(((lam plus (lam z ((plus 1) z))) \
                     (assert (lam x (lam y (+ x y))) #p \
                       (cap (-> Number? (-> Number? Number?)) (-> String? (-> String? String?))))) 5)";
        let (v, _, checks) = expect_value(src);
        assert_eq!(v.unwrap_value(), &Term::int(6));
        assert_eq!(checks, 6);
    }
}
