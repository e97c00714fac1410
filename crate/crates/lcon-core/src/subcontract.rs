//! The subcontracting judgments: context `⊑⁻`, subject `⊑⁺`, and the
//! derived naive (`⊑*`) and ordinary (`⊑`) subcontract relations.
//!
//! The two base judgments are defined by mutual induction and track
//! the swapping of responsibilities at function domains: the context
//! judgment checks domains with the subject judgment and vice versa
//! (both covariant in operand order — the swap is between judgments,
//! not operands).
//!
//! Comparisons of flat predicates bottom out in the relation `M ≤ N`
//! ("predicate M implies predicate N"), which consults an environment
//! Γ of predicate-implication facts plus alpha-equivalence. Γ keys are
//! built-in predicate names or alpha-normalized printed flat terms.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::ast::{Contract, Term};
use crate::syntax::{parse_term, print_term, ParseError};

/// The environment Γ of predicate-implication facts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ImplicationEnv {
    facts: BTreeSet<(String, String)>,
}

impl ImplicationEnv {
    /// An empty Γ (only reflexivity holds).
    pub fn empty() -> ImplicationEnv {
        ImplicationEnv::default()
    }

    /// The default Γ: exactly the facts about the built-in predicates
    /// (positive numbers are natural, naturals and negatives are
    /// numbers).
    pub fn standard() -> ImplicationEnv {
        let mut env = ImplicationEnv::empty();
        env.add_fact("Positive?", "Natural?");
        env.add_fact("Natural?", "Number?");
        env.add_fact("Positive?", "Number?");
        env.add_fact("Negative?", "Number?");
        env
    }

    pub fn add_fact(&mut self, antecedent: &str, consequent: &str) {
        self.facts
            .insert((antecedent.to_string(), consequent.to_string()));
    }

    /// `M ≤ N` on predicate keys: reflexivity plus the recorded facts.
    pub fn implies(&self, m: &str, n: &str) -> bool {
        m == n || self.facts.contains(&(m.to_string(), n.to_string()))
    }

    pub fn facts(&self) -> impl Iterator<Item = (&str, &str)> {
        self.facts.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    /// Parses the Γ config format: one fact per line, `LHS <= RHS`,
    /// where each side is a built-in predicate name or a quoted flat
    /// term (e.g. `"(lam x (> x 0))" <= Positive?`). Lines starting
    /// with `;` and blank lines are ignored.
    pub fn from_config_text(text: &str) -> Result<ImplicationEnv, ParseError> {
        let mut env = ImplicationEnv::empty();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with(';') {
                continue;
            }
            let Some((lhs, rhs)) = line.split_once("<=") else {
                return Err(ParseError {
                    line: lineno + 1,
                    col: 1,
                    msg: "expected a fact of the form `LHS <= RHS`".into(),
                });
            };
            let parse_side = |side: &str| -> Result<String, ParseError> {
                let side = side.trim();
                if let Some(quoted) = side.strip_prefix('"').and_then(|s| s.strip_suffix('"')) {
                    let term = parse_term(quoted).map_err(|e| ParseError {
                        line: lineno + 1,
                        col: e.col,
                        msg: e.msg,
                    })?;
                    Ok(flat_term_key(&term))
                } else {
                    Ok(side.to_string())
                }
            };
            env.add_fact(&parse_side(lhs)?, &parse_side(rhs)?);
        }
        Ok(env)
    }
}

/// Renames every bound term variable to a canonical name (v1, v2, … in
/// binding order) so alpha-equivalent predicates print identically.
pub fn alpha_normalize(t: &Term) -> Term {
    fn go(t: &Term, env: &mut Vec<(String, String)>, counter: &mut u32) -> Term {
        use alloc::boxed::Box;
        use alloc::format;
        match t {
            Term::Const(_) | Term::Blame(_, _) => t.clone(),
            Term::Var(x) => match env.iter().rev().find(|(orig, _)| orig == x) {
                Some((_, fresh)) => Term::Var(fresh.clone()),
                None => t.clone(),
            },
            Term::Lam(x, b) => {
                *counter += 1;
                let fresh = format!("v{counter}");
                env.push((x.clone(), fresh.clone()));
                let body = go(b, env, counter);
                env.pop();
                Term::Lam(fresh, Box::new(body))
            }
            Term::App(a, b) => Term::app(go(a, env, counter), go(b, env, counter)),
            Term::Op(op, a, b) => Term::op(*op, go(a, env, counter), go(b, env, counter)),
            Term::If(c, a, b) => {
                Term::if_(go(c, env, counter), go(a, env, counter), go(b, env, counter))
            }
            Term::Assert {
                subject,
                blame,
                contract,
            } => Term::Assert {
                subject: Box::new(go(subject, env, counter)),
                blame: blame.clone(),
                contract: go_contract(contract, env, counter),
            },
            Term::PredEval { value, var, pred } => Term::PredEval {
                value: Box::new(go(value, env, counter)),
                var: *var,
                pred: Box::new(go(pred, env, counter)),
            },
            Term::Fork(a, b) => Term::Fork(
                alloc::boxed::Box::new(go(a, env, counter)),
                alloc::boxed::Box::new(go(b, env, counter)),
            ),
        }
    }
    fn go_contract(c: &Contract, env: &mut Vec<(String, String)>, counter: &mut u32) -> Contract {
        use alloc::boxed::Box;
        use alloc::format;
        match c {
            Contract::Flat(m) => Contract::Flat(Box::new(go(m, env, counter))),
            Contract::Named(_) | Contract::Top | Contract::Bot => c.clone(),
            Contract::Func(d, r) => {
                Contract::func(go_contract(d, env, counter), go_contract(r, env, counter))
            }
            Contract::Dep(x, b) => {
                *counter += 1;
                let fresh = format!("v{counter}");
                env.push((x.clone(), fresh.clone()));
                let body = go_contract(b, env, counter);
                env.pop();
                Contract::Dep(fresh, Box::new(body))
            }
            Contract::And(l, r) => {
                Contract::and(go_contract(l, env, counter), go_contract(r, env, counter))
            }
            Contract::Or(l, r) => {
                Contract::or(go_contract(l, env, counter), go_contract(r, env, counter))
            }
        }
    }
    go(t, &mut Vec::new(), &mut 0)
}

/// The Γ key of a raw flat predicate term.
fn flat_term_key(m: &Term) -> String {
    print_term(&alpha_normalize(m))
}

/// The Γ key of an immediate contract's predicate, if it has one
/// (⊤ and ⊥ do not participate in ≤).
pub fn pred_key(c: &Contract) -> Option<String> {
    match c {
        Contract::Named(p) => Some(p.name().to_string()),
        Contract::Flat(m) => Some(flat_term_key(m)),
        _ => None,
    }
}

/// True for the immediate contracts ranged over by I, J in the
/// subcontracting figure (flat, named, ⊤, ⊥).
fn is_immediate(c: &Contract) -> bool {
    c.is_immediate()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Judgment {
    Context,
    Subject,
}

/// A memoized subcontracting session over one Γ.
#[derive(Debug)]
pub struct Subcontracting<'a> {
    env: &'a ImplicationEnv,
    memo: BTreeMap<(Judgment, Contract, Contract), bool>,
}

impl<'a> Subcontracting<'a> {
    pub fn new(env: &'a ImplicationEnv) -> Subcontracting<'a> {
        Subcontracting {
            env,
            memo: BTreeMap::new(),
        }
    }

    pub fn env(&self) -> &ImplicationEnv {
        self.env
    }

    /// Context subcontract `C ⊑⁻ D`.
    pub fn context_sub(&mut self, c: &Contract, d: &Contract) -> bool {
        self.derive(Judgment::Context, c, d)
    }

    /// Subject subcontract `C ⊑⁺ D`.
    pub fn subject_sub(&mut self, c: &Contract, d: &Contract) -> bool {
        self.derive(Judgment::Subject, c, d)
    }

    /// Naive subcontract `C ⊑* D`: restrictive on both portions.
    pub fn naive_sub(&mut self, c: &Contract, d: &Contract) -> bool {
        self.context_sub(c, d) && self.subject_sub(c, d)
    }

    /// Ordinary subcontract `C ⊑ D`: contravariant context portion,
    /// covariant subject portion.
    pub fn ordinary_sub(&mut self, c: &Contract, d: &Contract) -> bool {
        self.context_sub(d, c) && self.subject_sub(c, d)
    }

    fn derive(&mut self, j: Judgment, c: &Contract, d: &Contract) -> bool {
        let key = (j, c.clone(), d.clone());
        if let Some(v) = self.memo.get(&key) {
            return *v;
        }
        let v = derive_uncached(self.env, j, c, d, &mut Some(self));
        self.memo.insert(key, v);
        v
    }
}

/// One derivation step; `session` carries the memo when present (the
/// unmemoized reference path passes None and recurses directly).
fn derive_uncached(
    env: &ImplicationEnv,
    j: Judgment,
    c: &Contract,
    d: &Contract,
    session: &mut Option<&mut Subcontracting<'_>>,
) -> bool {
    let mut rec = |j2: Judgment, a: &Contract, b: &Contract| match session {
        Some(s) => s.derive(j2, a, b),
        None => derive_uncached(env, j2, a, b, &mut None),
    };

    // Reflexivity (up to alpha-renaming of dependent binders).
    if contract_alpha_eq(c, d) {
        return true;
    }
    match j {
        Judgment::Context => {
            // I ⊑⁻ J: immediates are context-interchangeable.
            if is_immediate(c) && is_immediate(d) {
                return true;
            }
        }
        Judgment::Subject => {
            // C ⊑⁺ ⊤ and ⊥ ⊑⁺ D.
            if matches!(d, Contract::Top) || matches!(c, Contract::Bot) {
                return true;
            }
            // flat(M) ⊑⁺ flat(N) iff M ≤ N.
            if let (Some(m), Some(n)) = (pred_key(c), pred_key(d)) {
                if env.implies(&m, &n) {
                    return true;
                }
            }
        }
    }

    // Function rule: the judgment swaps on domains.
    if let (Contract::Func(cd, cr), Contract::Func(dd, dr)) = (c, d) {
        let swapped = match j {
            Judgment::Context => Judgment::Subject,
            Judgment::Subject => Judgment::Context,
        };
        if rec(swapped, cd, dd) && rec(j, cr, dr) {
            return true;
        }
    }

    // Dependent rule: compare bodies alpha-aligned.
    if let (Contract::Dep(x, cb), Contract::Dep(y, db)) = (c, d) {
        let db = if x == y {
            (**db).clone()
        } else {
            db.substitute(y, &Term::Var(x.clone()))
        };
        if rec(j, cb, &db) {
            return true;
        }
    }

    // Intersection and union: the branching structure is dual between
    // the judgments.
    match j {
        Judgment::Context => {
            // (C_L ∩ C_R) ⊑⁻ D needs both halves.
            if let Contract::And(cl, cr) = c {
                if rec(j, cl, d) && rec(j, cr, d) {
                    return true;
                }
            }
            // C ⊑⁻ (D_L ∩ D_R) needs either half.
            if let Contract::And(dl, dr) = d {
                if rec(j, c, dl) || rec(j, c, dr) {
                    return true;
                }
            }
            // (C_L ∪ C_R) ⊑⁻ D needs either half.
            if let Contract::Or(cl, cr) = c {
                if rec(j, cl, d) || rec(j, cr, d) {
                    return true;
                }
            }
            // C ⊑⁻ (D_L ∪ D_R) needs both halves.
            if let Contract::Or(dl, dr) = d {
                if rec(j, c, dl) && rec(j, c, dr) {
                    return true;
                }
            }
        }
        Judgment::Subject => {
            // (C_L ∩ C_R) ⊑⁺ D needs either half.
            if let Contract::And(cl, cr) = c {
                if rec(j, cl, d) || rec(j, cr, d) {
                    return true;
                }
            }
            // C ⊑⁺ (D_L ∩ D_R) needs both halves.
            if let Contract::And(dl, dr) = d {
                if rec(j, c, dl) && rec(j, c, dr) {
                    return true;
                }
            }
            // (C_L ∪ C_R) ⊑⁺ D needs both halves.
            if let Contract::Or(cl, cr) = c {
                if rec(j, cl, d) && rec(j, cr, d) {
                    return true;
                }
            }
            // C ⊑⁺ (D_L ∪ D_R) needs either half.
            if let Contract::Or(dl, dr) = d {
                if rec(j, c, dl) || rec(j, c, dr) {
                    return true;
                }
            }
        }
    }
    false
}

pub(crate) fn contract_alpha_eq(c: &Contract, d: &Contract) -> bool {
    if c == d {
        return true;
    }
    // Compare after canonical binder renaming; using a dummy flat
    // wrapper reuses the term-level normalizer on contract structure.
    let wrap = |x: &Contract| {
        alpha_normalize(&Term::assert_var(Term::int(0), 0, x.clone()))
    };
    wrap(c) == wrap(d)
}

/// Convenience one-shot wrappers (a fresh memo per call).
pub fn context_sub(env: &ImplicationEnv, c: &Contract, d: &Contract) -> bool {
    Subcontracting::new(env).context_sub(c, d)
}

pub fn subject_sub(env: &ImplicationEnv, c: &Contract, d: &Contract) -> bool {
    Subcontracting::new(env).subject_sub(c, d)
}

pub fn naive_sub(env: &ImplicationEnv, c: &Contract, d: &Contract) -> bool {
    Subcontracting::new(env).naive_sub(c, d)
}

pub fn ordinary_sub(env: &ImplicationEnv, c: &Contract, d: &Contract) -> bool {
    Subcontracting::new(env).ordinary_sub(c, d)
}

/// Unmemoized reference implementation (for differential testing).
pub fn naive_sub_unmemoized(env: &ImplicationEnv, c: &Contract, d: &Contract) -> bool {
    derive_uncached(env, Judgment::Context, c, d, &mut None)
        && derive_uncached(env, Judgment::Subject, c, d, &mut None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::NamedPred;

    fn named(p: NamedPred) -> Contract {
        Contract::Named(p)
    }

    fn pos() -> Contract {
        named(NamedPred::Positive)
    }
    fn nat() -> Contract {
        named(NamedPred::Natural)
    }
    fn num() -> Contract {
        named(NamedPred::Number)
    }
    fn strq() -> Contract {
        named(NamedPred::String_)
    }

    #[test]
    fn gamma_implication() {
        let env = ImplicationEnv::standard();
        assert!(env.implies("Positive?", "Natural?"));
        assert!(!env.implies("Natural?", "Positive?"));
        assert!(env.implies("Number?", "Number?"));
    }

    #[test]
    fn gamma_config_parsing() {
        let env = ImplicationEnv::from_config_text(
            "; comment\nPositive? <= Natural?\n\"(lam x (> x 0))\" <= Positive?\n",
        )
        .unwrap();
        assert!(env.implies("Positive?", "Natural?"));
        assert!(env.implies("(lam v1 (> v1 0))", "Positive?"));
        assert!(ImplicationEnv::from_config_text("garbage line").is_err());
    }

    #[test]
    fn flat_keys_are_alpha_normal() {
        let a = parse_term("(lam x (> x 0))").unwrap();
        let b = parse_term("(lam y (> y 0))").unwrap();
        assert_eq!(
            pred_key(&Contract::Flat(alloc::boxed::Box::new(a))),
            pred_key(&Contract::Flat(alloc::boxed::Box::new(b)))
        );
    }

    #[test]
    fn subject_base_rules() {
        let env = ImplicationEnv::standard();
        assert!(subject_sub(&env, &pos(), &Contract::Top));
        assert!(subject_sub(&env, &Contract::Bot, &num()));
        assert!(subject_sub(&env, &pos(), &nat()));
        assert!(!subject_sub(&env, &num(), &pos()));
        assert!(subject_sub(&env, &pos(), &pos()));
    }

    #[test]
    fn context_immediates_are_interchangeable() {
        let env = ImplicationEnv::empty();
        assert!(context_sub(&env, &num(), &pos()));
        assert!(context_sub(&env, &pos(), &Contract::Top));
        assert!(context_sub(&env, &Contract::Bot, &strq()));
        // But an immediate is not below a function contract.
        assert!(!context_sub(&env, &num(), &Contract::func(num(), num())));
    }

    #[test]
    fn function_contract_judgments() {
        let env = ImplicationEnv::standard();
        let pp = Contract::func(pos(), pos());
        let nn = Contract::func(nat(), nat());
        let numnum = Contract::func(num(), num());
        // §5.2: (Positive? -> Positive?) ⊑* (Natural? -> Natural?).
        assert!(context_sub(&env, &pp, &nn));
        assert!(naive_sub(&env, &pp, &nn));
        // Verified instances used by the subset-transformation tests.
        assert!(naive_sub(&env, &pp, &Contract::func(Contract::Top, num())));
        assert!(naive_sub(&env, &pp, &Contract::func(num(), Contract::Top)));
        assert!(naive_sub(&env, &pp, &numnum));
        assert!(naive_sub(&env, &Contract::func(nat(), pos()), &numnum));
        assert!(naive_sub(&env, &pp, &Contract::func(nat(), pos())));
        // A string range is not implied.
        assert!(!naive_sub(
            &env,
            &pp,
            &Contract::func(Contract::Top, strq())
        ));
        // Naive is restrictive on BOTH portions: a less restrictive
        // domain breaks it.
        assert!(!naive_sub(&env, &numnum, &pp));
    }

    #[test]
    fn ordinary_subcontract_is_contravariant_in_domain() {
        let env = ImplicationEnv::standard();
        let c = Contract::func(nat(), pos());
        let d = Contract::func(pos(), nat());
        assert!(ordinary_sub(&env, &c, &d));
        assert!(!ordinary_sub(&env, &d, &c));
        assert!(ordinary_sub(&env, &c, &c));
    }

    #[test]
    fn dependent_bodies_compare_alpha_aligned() {
        let env = ImplicationEnv::empty();
        let c = Contract::Dep("x".into(), alloc::boxed::Box::new(pos()));
        let d = Contract::Dep("y".into(), alloc::boxed::Box::new(pos()));
        assert!(context_sub(&env, &c, &d));
        assert!(subject_sub(&env, &c, &d));
    }

    #[test]
    fn intersection_union_branch_rules() {
        let env = ImplicationEnv::standard();
        let pp = Contract::func(pos(), pos());
        let ss = Contract::func(strq(), strq());
        let both = Contract::and(pp.clone(), ss.clone());
        // Subject: an intersection is below D if either operand is.
        assert!(subject_sub(&env, &both, &pp));
        // Context: an intersection is below D only if both operands
        // are; here the string side is not context-below pp.
        assert!(!context_sub(&env, &both, &pp));
        // Subject: C below a union if either side fits.
        let uni = Contract::or(pos(), strq());
        assert!(subject_sub(&env, &pos(), &uni));
        // Context: C below a union needs both sides.
        assert!(context_sub(&env, &pos(), &uni));
        assert!(!context_sub(&env, &pp, &uni));
    }

    #[test]
    fn naive_sub_is_reflexive_and_transitive_on_samples() {
        let env = ImplicationEnv::standard();
        let samples = [
            pos(),
            nat(),
            num(),
            strq(),
            Contract::Top,
            Contract::Bot,
            Contract::func(pos(), pos()),
            Contract::func(nat(), nat()),
            Contract::func(num(), num()),
            Contract::and(num(), Contract::func(pos(), pos())),
            Contract::or(pos(), strq()),
            Contract::Dep("x".into(), alloc::boxed::Box::new(pos())),
        ];
        let mut sess = Subcontracting::new(&env);
        for c in &samples {
            assert!(sess.naive_sub(c, c), "not reflexive on {c:?}");
        }
        for a in &samples {
            for b in &samples {
                for c in &samples {
                    if sess.naive_sub(a, b) && sess.naive_sub(b, c) {
                        assert!(sess.naive_sub(a, c), "not transitive: {a:?} {b:?} {c:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn memoized_matches_unmemoized() {
        let env = ImplicationEnv::standard();
        let samples = [
            pos(),
            Contract::func(pos(), nat()),
            Contract::and(num(), Contract::func(pos(), pos())),
            Contract::or(Contract::func(pos(), pos()), Contract::func(strq(), strq())),
            Contract::Top,
            Contract::Bot,
        ];
        for a in &samples {
            for b in &samples {
                assert_eq!(
                    naive_sub(&env, a, b),
                    naive_sub_unmemoized(&env, a, b),
                    "memo mismatch on {a:?} vs {b:?}"
                );
            }
        }
    }

    #[test]
    fn semantic_soundness_spot_check() {
        // If Positive? ⊑* Natural?, every value satisfying Positive?
        // must satisfy Natural? — probe the built-in predicates.
        let env = ImplicationEnv::standard();
        let preds = [
            NamedPred::Number,
            NamedPred::String_,
            NamedPred::Positive,
            NamedPred::Natural,
            NamedPred::Negative,
        ];
        let probes = [
            Term::int(-2),
            Term::int(0),
            Term::int(1),
            Term::int(7),
            Term::str("s"),
            Term::bool(true),
            Term::lam("x", Term::var("x")),
        ];
        for p in preds {
            for q in preds {
                if naive_sub(&env, &Contract::Named(p), &Contract::Named(q)) {
                    for probe in &probes {
                        if p.holds(probe) {
                            assert!(
                                q.holds(probe),
                                "{} implies {} but probe {probe:?} disagrees",
                                p.name(),
                                q.name()
                            );
                        }
                    }
                }
            }
        }
    }
}
