//! Abstract syntax for the λ_Con contract calculus.
//!
//! Terms extend a call-by-value λ-calculus with contract assertions,
//! blame terms, and (during transformation) forks that track the
//! alternatives a union or intersection contract introduces. Contracts
//! split into *immediate* contracts, which can be checked as soon as a
//! value is available (flat predicates, ⊤, ⊥), and *delayed* contracts,
//! which wrap a value and fire when it is applied (function, dependent,
//! and intersections of delayed contracts).

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// A blame variable ι: an index into the constraint store.
pub type BlameVar = u32;

/// A source-level blame label ♭.
pub type Label = String;

/// The `b` of `assert M b C`: either a source label ♭ or a blame
/// variable ι allocated by rule Assert / Unfold-Assert.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BlameRef {
    Label(Label),
    Var(BlameVar),
}

impl BlameRef {
    pub fn as_var(&self) -> Option<BlameVar> {
        match self {
            BlameRef::Var(v) => Some(*v),
            BlameRef::Label(_) => None,
        }
    }
}

/// Polarity of a blame term: `Positive` blames the subject of the
/// contract, `Negative` blames its context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn flip(self) -> Polarity {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }
}

/// Built-in binary operators. `+` also concatenates strings; the
/// comparison operators are defined on integers only and yield
/// booleans. Every other operand combination is stuck.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Eq,
    Lt,
    Gt,
    Le,
    Ge,
}

impl Op {
    pub fn symbol(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Eq => "=",
            Op::Lt => "<",
            Op::Gt => ">",
            Op::Le => "<=",
            Op::Ge => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Op> {
        Some(match s {
            "+" => Op::Add,
            "-" => Op::Sub,
            "*" => Op::Mul,
            "=" => Op::Eq,
            "<" => Op::Lt,
            ">" => Op::Gt,
            "<=" => Op::Le,
            ">=" => Op::Ge,
            _ => return None,
        })
    }
}

/// Ground constants K.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constant {
    Int(i64),
    Bool(bool),
    Str(String),
}

/// Built-in named flat predicates. They are total: a non-matching
/// value (including lambdas) makes them false, never stuck.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NamedPred {
    Number,
    String_,
    Positive,
    Natural,
    Negative,
}

impl NamedPred {
    pub fn name(self) -> &'static str {
        match self {
            NamedPred::Number => "Number?",
            NamedPred::String_ => "String?",
            NamedPred::Positive => "Positive?",
            NamedPred::Natural => "Natural?",
            NamedPred::Negative => "Negative?",
        }
    }

    pub fn from_name(s: &str) -> Option<NamedPred> {
        Some(match s {
            "Number?" => NamedPred::Number,
            "String?" => NamedPred::String_,
            "Positive?" => NamedPred::Positive,
            "Natural?" => NamedPred::Natural,
            "Negative?" => NamedPred::Negative,
            _ => return None,
        })
    }

    /// The predicate's verdict on an (unwrapped) value.
    pub fn holds(self, value: &Term) -> bool {
        match (self, value) {
            (NamedPred::Number, Term::Const(Constant::Int(_))) => true,
            (NamedPred::String_, Term::Const(Constant::Str(_))) => true,
            (NamedPred::Positive, Term::Const(Constant::Int(n))) => *n > 0,
            (NamedPred::Natural, Term::Const(Constant::Int(n))) => *n >= 0,
            (NamedPred::Negative, Term::Const(Constant::Int(n))) => *n < 0,
            _ => false,
        }
    }
}

/// Contracts C, D. After [`Contract::normalize`], every intersection is
/// either `(I ∩ C)` with an immediate left operand or an intersection
/// of delayed contracts, and no union appears under an intersection.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Contract {
    /// A raw flat contract `flat(M)`: the predicate term M is applied
    /// to the unwrapped value.
    Flat(Box<Term>),
    /// A built-in named flat contract (`Number?`, …).
    Named(NamedPred),
    /// Function contract C → D.
    Func(Box<Contract>, Box<Contract>),
    /// Dependent contract dep(λx.C): the contract for the result may
    /// mention the (unwrapped) argument.
    Dep(String, Box<Contract>),
    /// Intersection C ∩ D.
    And(Box<Contract>, Box<Contract>),
    /// Union C ∪ D.
    Or(Box<Contract>, Box<Contract>),
    /// ⊤: satisfied without checking.
    Top,
    /// ⊥: violated without checking.
    Bot,
}

impl Contract {
    pub fn func(domain: Contract, range: Contract) -> Contract {
        Contract::Func(Box::new(domain), Box::new(range))
    }

    pub fn and(left: Contract, right: Contract) -> Contract {
        Contract::And(Box::new(left), Box::new(right))
    }

    pub fn or(left: Contract, right: Contract) -> Contract {
        Contract::Or(Box::new(left), Box::new(right))
    }

    /// Immediate contracts: checkable on a value without applying it.
    pub fn is_immediate(&self) -> bool {
        matches!(
            self,
            Contract::Flat(_) | Contract::Named(_) | Contract::Top | Contract::Bot
        )
    }

    /// Delayed contracts Q: function and dependent contracts, and
    /// intersections of delayed contracts. A value wrapped in a delayed
    /// contract is itself a value.
    pub fn is_delayed(&self) -> bool {
        match self {
            Contract::Func(_, _) | Contract::Dep(_, _) => true,
            Contract::And(l, r) => l.is_delayed() && r.is_delayed(),
            _ => false,
        }
    }

    /// Rewrites the contract into the normal form assumed by the
    /// reduction rules: unions are distributed out of intersections and
    /// immediate operands are rotated to the left of an intersection,
    /// so every `And` is `(immediate ∩ C)` or delayed ∩ delayed.
    pub fn normalize(self) -> Contract {
        match self {
            Contract::Flat(m) => Contract::Flat(m),
            Contract::Named(p) => Contract::Named(p),
            Contract::Top => Contract::Top,
            Contract::Bot => Contract::Bot,
            Contract::Func(d, r) => Contract::func(d.normalize(), r.normalize()),
            Contract::Dep(x, c) => Contract::Dep(x, Box::new(c.normalize())),
            Contract::Or(l, r) => Contract::or(l.normalize(), r.normalize()),
            Contract::And(l, r) => normalize_and(l.normalize(), r.normalize()),
        }
    }
}

/// Combines two already-normalized contracts into a normalized
/// intersection.
fn normalize_and(a: Contract, b: Contract) -> Contract {
    // Distribute unions out of the intersection first.
    if let Contract::Or(x, y) = a {
        return Contract::or(normalize_and(*x, b.clone()), normalize_and(*y, b));
    }
    if let Contract::Or(x, y) = b {
        return Contract::or(normalize_and(a.clone(), *x), normalize_and(a, *y));
    }
    if a.is_immediate() {
        return Contract::and(a, b);
    }
    if a.is_delayed() {
        if b.is_delayed() {
            return Contract::and(a, b);
        }
        if b.is_immediate() {
            return Contract::and(b, a);
        }
        // b is (immediate ∩ C): rotate its immediate head out.
        if let Contract::And(i, c) = b {
            return Contract::and(*i, normalize_and(a, *c));
        }
        unreachable!("normalized contract must be immediate, delayed, union, or (I and C)");
    }
    // a is (immediate ∩ C): reassociate so the immediate head leads.
    if let Contract::And(i, c) = a {
        return Contract::and(*i, normalize_and(*c, b));
    }
    unreachable!("normalized contract must be immediate, delayed, union, or (I and C)");
}

/// Terms of λ_Con, including the intermediate forms that only occur
/// during evaluation or transformation (blame-variable asserts, running
/// predicate checks, blame terms, forks).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(Constant),
    Var(String),
    Lam(String, Box<Term>),
    App(Box<Term>, Box<Term>),
    Op(Op, Box<Term>, Box<Term>),
    If(Box<Term>, Box<Term>, Box<Term>),
    /// `assert M b C`.
    Assert {
        subject: Box<Term>,
        blame: BlameRef,
        contract: Contract,
    },
    /// The running flat check `assert V ι (eval M)`: `pred` is the
    /// predicate application being evaluated, `value` the checked value
    /// that becomes the result once the check records its outcome.
    PredEval {
        value: Box<Term>,
        var: BlameVar,
        pred: Box<Term>,
    },
    /// `blame^♭` with an explicit polarity.
    Blame(Label, Polarity),
    /// A fork of two observations (left = first alternative).
    Fork(Box<Term>, Box<Term>),
}

impl Term {
    pub fn int(n: i64) -> Term {
        Term::Const(Constant::Int(n))
    }

    pub fn bool(b: bool) -> Term {
        Term::Const(Constant::Bool(b))
    }

    pub fn str(s: &str) -> Term {
        Term::Const(Constant::Str(s.to_string()))
    }

    pub fn var(x: &str) -> Term {
        Term::Var(x.to_string())
    }

    pub fn lam(x: &str, body: Term) -> Term {
        Term::Lam(x.to_string(), Box::new(body))
    }

    pub fn app(f: Term, a: Term) -> Term {
        Term::App(Box::new(f), Box::new(a))
    }

    pub fn op(op: Op, l: Term, r: Term) -> Term {
        Term::Op(op, Box::new(l), Box::new(r))
    }

    pub fn if_(c: Term, t: Term, e: Term) -> Term {
        Term::If(Box::new(c), Box::new(t), Box::new(e))
    }

    pub fn assert(subject: Term, blame: BlameRef, contract: Contract) -> Term {
        Term::Assert {
            subject: Box::new(subject),
            blame,
            contract,
        }
    }

    pub fn assert_label(subject: Term, label: &str, contract: Contract) -> Term {
        Term::assert(subject, BlameRef::Label(label.to_string()), contract)
    }

    pub fn assert_var(subject: Term, var: BlameVar, contract: Contract) -> Term {
        Term::assert(subject, BlameRef::Var(var), contract)
    }

    /// Values: constants, lambdas, and delayed-contract wrappers around
    /// values.
    pub fn is_value(&self) -> bool {
        match self {
            Term::Const(_) | Term::Lam(_, _) => true,
            Term::Assert {
                subject,
                blame: BlameRef::Var(_),
                contract,
            } => contract.is_delayed() && subject.is_value(),
            _ => false,
        }
    }

    /// Strips every contract wrapper off a value.
    pub fn unwrap_value(&self) -> &Term {
        match self {
            Term::Assert { subject, .. } => subject.unwrap_value(),
            other => other,
        }
    }

    /// Free term variables.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut acc = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut acc);
        acc
    }

    fn collect_free(&self, bound: &mut Vec<String>, acc: &mut BTreeSet<String>) {
        match self {
            Term::Const(_) | Term::Blame(_, _) => {}
            Term::Var(x) => {
                if !bound.iter().any(|b| b == x) {
                    acc.insert(x.clone());
                }
            }
            Term::Lam(x, body) => {
                bound.push(x.clone());
                body.collect_free(bound, acc);
                bound.pop();
            }
            Term::App(f, a) => {
                f.collect_free(bound, acc);
                a.collect_free(bound, acc);
            }
            Term::Op(_, l, r) => {
                l.collect_free(bound, acc);
                r.collect_free(bound, acc);
            }
            Term::If(c, t, e) => {
                c.collect_free(bound, acc);
                t.collect_free(bound, acc);
                e.collect_free(bound, acc);
            }
            Term::Assert {
                subject, contract, ..
            } => {
                subject.collect_free(bound, acc);
                contract.collect_free(bound, acc);
            }
            Term::PredEval { value, pred, .. } => {
                value.collect_free(bound, acc);
                pred.collect_free(bound, acc);
            }
            Term::Fork(l, r) => {
                l.collect_free(bound, acc);
                r.collect_free(bound, acc);
            }
        }
    }
}

impl Contract {
    fn collect_free(&self, bound: &mut Vec<String>, acc: &mut BTreeSet<String>) {
        match self {
            Contract::Flat(m) => m.collect_free(bound, acc),
            Contract::Named(_) | Contract::Top | Contract::Bot => {}
            Contract::Func(d, r) => {
                d.collect_free(bound, acc);
                r.collect_free(bound, acc);
            }
            Contract::Dep(x, c) => {
                bound.push(x.clone());
                c.collect_free(bound, acc);
                bound.pop();
            }
            Contract::And(l, r) | Contract::Or(l, r) => {
                l.collect_free(bound, acc);
                r.collect_free(bound, acc);
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut acc = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut acc);
        acc
    }
}

/// Picks a variable name based on `base` that avoids every name in
/// `avoid`.
fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    if !avoid.contains(base) {
        return base.to_string();
    }
    let stem = base.trim_end_matches(|c: char| c.is_ascii_digit() || c == '\'');
    let stem = if stem.is_empty() { "x" } else { stem };
    let mut n = 1u32;
    loop {
        let candidate = format!("{stem}'{n}");
        if !avoid.contains(&candidate) {
            return candidate;
        }
        n += 1;
    }
}

impl Term {
    /// Capture-avoiding substitution `self[x ↦ replacement]`. Descends
    /// into flat predicates and dependent contract bodies, renaming
    /// binders when they would capture a free variable of
    /// `replacement`.
    pub fn substitute(&self, x: &str, replacement: &Term) -> Term {
        let free = replacement.free_vars();
        self.subst(x, replacement, &free)
    }

    fn subst(&self, x: &str, r: &Term, r_free: &BTreeSet<String>) -> Term {
        match self {
            Term::Const(_) | Term::Blame(_, _) => self.clone(),
            Term::Var(y) => {
                if y == x {
                    r.clone()
                } else {
                    self.clone()
                }
            }
            Term::Lam(y, body) => {
                if y == x {
                    self.clone()
                } else if r_free.contains(y) && body.free_vars().contains(x) {
                    let mut avoid: BTreeSet<String> = r_free.clone();
                    avoid.extend(body.free_vars());
                    avoid.insert(x.to_string());
                    let y2 = fresh_name(y, &avoid);
                    let renamed = body.subst(y, &Term::Var(y2.clone()), &BTreeSet::new());
                    Term::Lam(y2, Box::new(renamed.subst(x, r, r_free)))
                } else {
                    Term::Lam(y.clone(), Box::new(body.subst(x, r, r_free)))
                }
            }
            Term::App(f, a) => Term::App(
                Box::new(f.subst(x, r, r_free)),
                Box::new(a.subst(x, r, r_free)),
            ),
            Term::Op(op, l, rr) => Term::Op(
                *op,
                Box::new(l.subst(x, r, r_free)),
                Box::new(rr.subst(x, r, r_free)),
            ),
            Term::If(c, t, e) => Term::If(
                Box::new(c.subst(x, r, r_free)),
                Box::new(t.subst(x, r, r_free)),
                Box::new(e.subst(x, r, r_free)),
            ),
            Term::Assert {
                subject,
                blame,
                contract,
            } => Term::Assert {
                subject: Box::new(subject.subst(x, r, r_free)),
                blame: blame.clone(),
                contract: contract.subst(x, r, r_free),
            },
            Term::PredEval { value, var, pred } => Term::PredEval {
                value: Box::new(value.subst(x, r, r_free)),
                var: *var,
                pred: Box::new(pred.subst(x, r, r_free)),
            },
            Term::Fork(l, rr) => Term::Fork(
                Box::new(l.subst(x, r, r_free)),
                Box::new(rr.subst(x, r, r_free)),
            ),
        }
    }
}

impl Contract {
    /// Capture-avoiding substitution of a term variable inside a
    /// contract (used by beta reduction and by D-Dependent).
    pub fn substitute(&self, x: &str, replacement: &Term) -> Contract {
        let free = replacement.free_vars();
        self.subst(x, replacement, &free)
    }

    fn subst(&self, x: &str, r: &Term, r_free: &BTreeSet<String>) -> Contract {
        match self {
            Contract::Flat(m) => Contract::Flat(Box::new(m.subst(x, r, r_free))),
            Contract::Named(_) | Contract::Top | Contract::Bot => self.clone(),
            Contract::Func(d, ran) => Contract::func(d.subst(x, r, r_free), ran.subst(x, r, r_free)),
            Contract::Dep(y, c) => {
                if y == x {
                    self.clone()
                } else if r_free.contains(y) && c.free_vars().contains(x) {
                    let mut avoid: BTreeSet<String> = r_free.clone();
                    avoid.extend(c.free_vars());
                    avoid.insert(x.to_string());
                    let y2 = fresh_name(y, &avoid);
                    let renamed = c.subst(y, &Term::Var(y2.clone()), &BTreeSet::new());
                    Contract::Dep(y2, Box::new(renamed.subst(x, r, r_free)))
                } else {
                    Contract::Dep(y.clone(), Box::new(c.subst(x, r, r_free)))
                }
            }
            Contract::And(l, rr) => Contract::and(l.subst(x, r, r_free), rr.subst(x, r, r_free)),
            Contract::Or(l, rr) => Contract::or(l.subst(x, r, r_free), rr.subst(x, r, r_free)),
        }
    }
}

/// Alpha-equivalence of terms (binders aligned positionally; blame
/// refs, labels, and contracts must match exactly).
pub fn alpha_eq(a: &Term, b: &Term) -> bool {
    alpha_eq_in(a, b, &mut Vec::new())
}

fn lookup_binder(env: &[(String, String)], x: &str) -> Option<usize> {
    env.iter().rposition(|(l, _)| l == x)
}

fn alpha_eq_in(a: &Term, b: &Term, env: &mut Vec<(String, String)>) -> bool {
    match (a, b) {
        (Term::Const(x), Term::Const(y)) => x == y,
        (Term::Var(x), Term::Var(y)) => {
            let lx = lookup_binder(env, x);
            let ly = env.iter().rposition(|(_, r)| r == y);
            match (lx, ly) {
                (Some(i), Some(j)) => i == j,
                (None, None) => x == y,
                _ => false,
            }
        }
        (Term::Lam(x, bx), Term::Lam(y, by)) => {
            env.push((x.clone(), y.clone()));
            let r = alpha_eq_in(bx, by, env);
            env.pop();
            r
        }
        (Term::App(f1, a1), Term::App(f2, a2)) => {
            alpha_eq_in(f1, f2, env) && alpha_eq_in(a1, a2, env)
        }
        (Term::Op(o1, l1, r1), Term::Op(o2, l2, r2)) => {
            o1 == o2 && alpha_eq_in(l1, l2, env) && alpha_eq_in(r1, r2, env)
        }
        (Term::If(c1, t1, e1), Term::If(c2, t2, e2)) => {
            alpha_eq_in(c1, c2, env) && alpha_eq_in(t1, t2, env) && alpha_eq_in(e1, e2, env)
        }
        (
            Term::Assert {
                subject: s1,
                blame: b1,
                contract: c1,
            },
            Term::Assert {
                subject: s2,
                blame: b2,
                contract: c2,
            },
        ) => b1 == b2 && alpha_eq_in(s1, s2, env) && alpha_eq_contract(c1, c2, env),
        (
            Term::PredEval {
                value: v1,
                var: i1,
                pred: p1,
            },
            Term::PredEval {
                value: v2,
                var: i2,
                pred: p2,
            },
        ) => i1 == i2 && alpha_eq_in(v1, v2, env) && alpha_eq_in(p1, p2, env),
        (Term::Blame(l1, p1), Term::Blame(l2, p2)) => l1 == l2 && p1 == p2,
        (Term::Fork(l1, r1), Term::Fork(l2, r2)) => {
            alpha_eq_in(l1, l2, env) && alpha_eq_in(r1, r2, env)
        }
        _ => false,
    }
}

fn alpha_eq_contract(a: &Contract, b: &Contract, env: &mut Vec<(String, String)>) -> bool {
    match (a, b) {
        (Contract::Flat(m), Contract::Flat(n)) => alpha_eq_in(m, n, env),
        (Contract::Named(p), Contract::Named(q)) => p == q,
        (Contract::Top, Contract::Top) | (Contract::Bot, Contract::Bot) => true,
        (Contract::Func(d1, r1), Contract::Func(d2, r2)) => {
            alpha_eq_contract(d1, d2, env) && alpha_eq_contract(r1, r2, env)
        }
        (Contract::Dep(x, c1), Contract::Dep(y, c2)) => {
            env.push((x.clone(), y.clone()));
            let r = alpha_eq_contract(c1, c2, env);
            env.pop();
            r
        }
        (Contract::And(l1, r1), Contract::And(l2, r2))
        | (Contract::Or(l1, r1), Contract::Or(l2, r2)) => {
            alpha_eq_contract(l1, l2, env) && alpha_eq_contract(r1, r2, env)
        }
        _ => false,
    }
}

/// Renumbers the blame variables of a term by first occurrence
/// (left-to-right, depth-first), so two terms that differ only in the
/// numbering of their blame variables become identical. Labels are left
/// alone.
pub fn canonicalize_blame_vars(t: &Term) -> Term {
    let mut map: BTreeMap<BlameVar, BlameVar> = BTreeMap::new();
    renumber(t, &mut map)
}

fn renumber_var(v: BlameVar, map: &mut BTreeMap<BlameVar, BlameVar>) -> BlameVar {
    if let Some(n) = map.get(&v) {
        return *n;
    }
    let n = map.len() as BlameVar + 1;
    map.insert(v, n);
    n
}

fn renumber(t: &Term, map: &mut BTreeMap<BlameVar, BlameVar>) -> Term {
    match t {
        Term::Const(_) | Term::Var(_) | Term::Blame(_, _) => t.clone(),
        Term::Lam(x, b) => Term::Lam(x.clone(), Box::new(renumber(b, map))),
        Term::App(f, a) => Term::App(Box::new(renumber(f, map)), Box::new(renumber(a, map))),
        Term::Op(o, l, r) => Term::Op(*o, Box::new(renumber(l, map)), Box::new(renumber(r, map))),
        Term::If(c, t1, t2) => Term::If(
            Box::new(renumber(c, map)),
            Box::new(renumber(t1, map)),
            Box::new(renumber(t2, map)),
        ),
        Term::Assert {
            subject,
            blame,
            contract,
        } => Term::Assert {
            subject: Box::new(renumber(subject, map)),
            blame: match blame {
                BlameRef::Label(l) => BlameRef::Label(l.clone()),
                BlameRef::Var(v) => BlameRef::Var(renumber_var(*v, map)),
            },
            contract: renumber_contract(contract, map),
        },
        Term::PredEval { value, var, pred } => Term::PredEval {
            value: Box::new(renumber(value, map)),
            var: renumber_var(*var, map),
            pred: Box::new(renumber(pred, map)),
        },
        Term::Fork(l, r) => Term::Fork(Box::new(renumber(l, map)), Box::new(renumber(r, map))),
    }
}

fn renumber_contract(c: &Contract, map: &mut BTreeMap<BlameVar, BlameVar>) -> Contract {
    match c {
        Contract::Flat(m) => Contract::Flat(Box::new(renumber(m, map))),
        Contract::Named(_) | Contract::Top | Contract::Bot => c.clone(),
        Contract::Func(d, r) => {
            Contract::func(renumber_contract(d, map), renumber_contract(r, map))
        }
        Contract::Dep(x, b) => Contract::Dep(x.clone(), Box::new(renumber_contract(b, map))),
        Contract::And(l, r) => Contract::and(renumber_contract(l, map), renumber_contract(r, map)),
        Contract::Or(l, r) => Contract::or(renumber_contract(l, map), renumber_contract(r, map)),
    }
}

/// Equality up to alpha-renaming of term binders *and* renumbering of
/// blame variables — the comparison used for golden transformation
/// outputs.
pub fn equivalent_mod_renaming(a: &Term, b: &Term) -> bool {
    alpha_eq(&canonicalize_blame_vars(a), &canonicalize_blame_vars(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_include_delayed_wrappers() {
        let f = Term::lam("x", Term::var("x"));
        let wrapped = Term::assert_var(
            f.clone(),
            1,
            Contract::func(Contract::Named(NamedPred::Number), Contract::Top),
        );
        assert!(wrapped.is_value());
        let flat = Term::assert_var(f.clone(), 1, Contract::Named(NamedPred::Number));
        assert!(!flat.is_value());
        // A label-form assert is never a value: rule Assert must fire first.
        let labeled = Term::assert_label(
            f,
            "l",
            Contract::func(Contract::Named(NamedPred::Number), Contract::Top),
        );
        assert!(!labeled.is_value());
    }

    #[test]
    fn unwrap_strips_nested_wrappers() {
        let inner = Term::int(7);
        let w1 = Term::assert_var(inner.clone(), 1, Contract::func(Contract::Top, Contract::Top));
        let w2 = Term::assert_var(w1, 2, Contract::func(Contract::Top, Contract::Bot));
        assert_eq!(w2.unwrap_value(), &inner);
    }

    #[test]
    fn substitution_avoids_capture() {
        // (λy. x y)[x ↦ y]  must rename the binder, not capture.
        let t = Term::lam("y", Term::app(Term::var("x"), Term::var("y")));
        let r = t.substitute("x", &Term::var("y"));
        match &r {
            Term::Lam(b, body) => {
                assert_ne!(b, "y");
                assert_eq!(**body, Term::app(Term::var("y"), Term::var(b)));
            }
            other => panic!("expected lambda, got {other:?}"),
        }
    }

    #[test]
    fn substitution_descends_into_contracts() {
        // (assert z #l (flat (lam v (= v x))))[x ↦ 3]
        let c = Contract::Flat(Box::new(Term::lam(
            "v",
            Term::op(Op::Eq, Term::var("v"), Term::var("x")),
        )));
        let t = Term::assert_label(Term::var("z"), "l", c);
        let r = t.substitute("x", &Term::int(3));
        match r {
            Term::Assert { contract, .. } => {
                assert_eq!(
                    contract,
                    Contract::Flat(Box::new(Term::lam(
                        "v",
                        Term::op(Op::Eq, Term::var("v"), Term::int(3)),
                    )))
                );
            }
            other => panic!("expected assert, got {other:?}"),
        }
    }

    #[test]
    fn dependent_binder_shadows_substitution() {
        let c = Contract::Dep(
            "x".to_string(),
            Box::new(Contract::Flat(Box::new(Term::var("x")))),
        );
        assert_eq!(c.substitute("x", &Term::int(1)), c);
    }

    #[test]
    fn alpha_equivalence_aligns_binders() {
        let a = Term::lam("x", Term::lam("y", Term::app(Term::var("x"), Term::var("y"))));
        let b = Term::lam("u", Term::lam("v", Term::app(Term::var("u"), Term::var("v"))));
        assert!(alpha_eq(&a, &b));
        let c = Term::lam("u", Term::lam("v", Term::app(Term::var("v"), Term::var("u"))));
        assert!(!alpha_eq(&a, &c));
    }

    #[test]
    fn normalization_distributes_unions_out_of_intersections() {
        let num = Contract::Named(NamedPred::Number);
        let pos = Contract::Named(NamedPred::Positive);
        let neg = Contract::Named(NamedPred::Negative);
        let c = Contract::and(Contract::or(pos.clone(), neg.clone()), num.clone());
        let n = c.normalize();
        assert_eq!(
            n,
            Contract::or(
                Contract::and(pos, num.clone()),
                Contract::and(neg, num),
            )
        );
    }

    #[test]
    fn normalization_rotates_immediates_to_the_left() {
        let num = Contract::Named(NamedPred::Number);
        let q = Contract::func(Contract::Named(NamedPred::Positive), Contract::Top);
        let c = Contract::and(q.clone(), num.clone());
        assert_eq!(c.normalize(), Contract::and(num, q));
    }

    #[test]
    fn normalization_keeps_delayed_intersections() {
        let q = Contract::func(Contract::Named(NamedPred::Number), Contract::Top);
        let r = Contract::func(Contract::Named(NamedPred::String_), Contract::Top);
        let c = Contract::and(q.clone(), r.clone());
        assert_eq!(c.clone().normalize(), c);
        assert!(c.is_delayed());
    }

    #[test]
    fn blame_var_renumbering_is_order_of_occurrence() {
        let a = Term::assert_var(
            Term::assert_var(Term::int(1), 7, Contract::Named(NamedPred::Number)),
            3,
            Contract::Named(NamedPred::Positive),
        );
        let b = Term::assert_var(
            Term::assert_var(Term::int(1), 1, Contract::Named(NamedPred::Number)),
            2,
            Contract::Named(NamedPred::Positive),
        );
        assert!(equivalent_mod_renaming(&a, &b));
    }
}
