//! Type-directed random program generator for the fuzz harness.
//!
//! Programs are generated against a tiny simple-type discipline (int,
//! bool, string, functions) so that every case is closed, well-scoped,
//! and strongly normalizing: applications always receive functions,
//! operators always receive operands of the right shape, and there is
//! no recursion.  Evaluation therefore ends in a value or in blame,
//! never stuck and never out of fuel.
//!
//! Contracts are drawn from the named predicates, comparison-based
//! flat predicates (straight-line bodies, so transformation-time
//! verification always terminates), function and dependent contracts,
//! and intersections/unions.  A global alternation budget keeps the
//! number of intersection/union connectives per program small enough
//! that the subset tier's fork tree stays far below its branch limit.
//! Every assertion receives a distinct blame label, as source programs
//! require.

use lcon_core::{parse_source_named, print_term, BlameRef, Contract, NamedPred, Op, SourceProgram, Term};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Size knobs for generated programs.
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub term_depth: u32,
    pub contract_depth: u32,
    pub label_budget: u32,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            term_depth: 4,
            contract_depth: 2,
            label_budget: 4,
        }
    }
}

/// Simple types used to steer generation.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Ty {
    Int,
    Bool,
    Str,
    Fun(Box<Ty>, Box<Ty>),
}

impl Ty {
    fn fun(a: Ty, b: Ty) -> Ty {
        Ty::Fun(Box::new(a), Box::new(b))
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Gen<'a> {
    rng: ChaCha8Rng,
    cfg: &'a GenConfig,
    labels_left: u32,
    next_label: u32,
    next_var: u32,
    /// Remaining intersection/union connectives for the whole program.
    alt_budget: u32,
}

impl Gen<'_> {
    fn range(&mut self, n: u32) -> u32 {
        self.rng.gen_range(0..n)
    }

    fn fresh_var(&mut self) -> String {
        let v = format!("v{}", self.next_var);
        self.next_var += 1;
        v
    }

    fn fresh_label(&mut self) -> String {
        let l = format!("f{}", self.next_label);
        self.next_label += 1;
        self.labels_left -= 1;
        l
    }

    fn literal(&mut self, ty: &Ty) -> Term {
        match ty {
            Ty::Int => Term::int(self.rng.gen_range(-4..=9)),
            Ty::Bool => Term::bool(self.rng.gen()),
            Ty::Str => {
                let options = ["a", "b", "ab", "ba"];
                Term::str(options[self.range(options.len() as u32) as usize])
            }
            Ty::Fun(_, b) => {
                let x = self.fresh_var();
                let body = self.literal(&b.clone());
                Term::lam(&x, body)
            }
        }
    }

    fn atom(&mut self, env: &[(String, Ty)], ty: &Ty) -> Term {
        let vars: Vec<&String> = env
            .iter()
            .filter(|(_, t)| t == ty)
            .map(|(x, _)| x)
            .collect();
        if !vars.is_empty() && self.range(2) == 0 {
            let i = self.range(vars.len() as u32) as usize;
            return Term::var(vars[i]);
        }
        self.literal(ty)
    }

    /// Argument types for generated applications.
    fn arg_ty(&mut self, depth: u32) -> Ty {
        match self.range(8) {
            0..=3 => Ty::Int,
            4 => Ty::Bool,
            5 | 6 => Ty::Str,
            _ if depth > 0 => Ty::fun(Ty::Int, Ty::Int),
            _ => Ty::Int,
        }
    }

    fn term(&mut self, env: &mut Vec<(String, Ty)>, ty: &Ty, depth: u32) -> Term {
        if depth == 0 {
            return self.atom(env, ty);
        }
        #[derive(Clone, Copy)]
        enum Opt {
            Atom,
            Lam,
            App,
            Operator,
            Branch,
            Assert,
        }
        let mut options: Vec<(u32, Opt)> = vec![(2, Opt::Atom), (3, Opt::App), (2, Opt::Branch)];
        if matches!(ty, Ty::Fun(..)) {
            options.push((4, Opt::Lam));
        } else {
            options.push((3, Opt::Operator));
        }
        if self.labels_left > 0 && !matches!(ty, Ty::Bool) {
            options.push((3, Opt::Assert));
        }
        let total: u32 = options.iter().map(|(w, _)| w).sum();
        let mut roll = self.range(total);
        let mut chosen = options[0].1;
        for (w, opt) in &options {
            if roll < *w {
                chosen = *opt;
                break;
            }
            roll -= w;
        }
        match chosen {
            Opt::Atom => self.atom(env, ty),
            Opt::Lam => {
                let Ty::Fun(a, b) = ty else { unreachable!() };
                let x = self.fresh_var();
                env.push((x.clone(), (**a).clone()));
                let body = self.term(env, &b.clone(), depth - 1);
                env.pop();
                Term::lam(&x, body)
            }
            Opt::App => {
                let arg = self.arg_ty(depth - 1);
                let f = self.term(env, &Ty::fun(arg.clone(), ty.clone()), depth - 1);
                let a = self.term(env, &arg, depth - 1);
                Term::app(f, a)
            }
            Opt::Operator => match ty {
                Ty::Int => {
                    let op = [Op::Add, Op::Sub, Op::Mul][self.range(3) as usize];
                    let a = self.term(env, &Ty::Int, depth - 1);
                    let b = self.term(env, &Ty::Int, depth - 1);
                    Term::Op(op, Box::new(a), Box::new(b))
                }
                Ty::Bool => {
                    let op = [Op::Eq, Op::Lt, Op::Gt, Op::Le, Op::Ge][self.range(5) as usize];
                    let a = self.term(env, &Ty::Int, depth - 1);
                    let b = self.term(env, &Ty::Int, depth - 1);
                    Term::Op(op, Box::new(a), Box::new(b))
                }
                Ty::Str => {
                    let a = self.term(env, &Ty::Str, depth - 1);
                    let b = self.term(env, &Ty::Str, depth - 1);
                    Term::Op(Op::Add, Box::new(a), Box::new(b))
                }
                Ty::Fun(..) => unreachable!(),
            },
            Opt::Branch => {
                let c = self.term(env, &Ty::Bool, depth - 1);
                let a = self.term(env, ty, depth - 1);
                let b = self.term(env, ty, depth - 1);
                Term::If(Box::new(c), Box::new(a), Box::new(b))
            }
            Opt::Assert => {
                // Reserve the label before recursing: the subject may
                // itself contain assertions that drain the budget.
                let label = self.fresh_label();
                let subject = self.term(env, ty, depth - 1);
                let contract = self.contract(ty, self.cfg.contract_depth);
                Term::Assert {
                    subject: Box::new(subject),
                    blame: BlameRef::Label(label),
                    contract,
                }
            }
        }
    }

    fn int_leaf(&mut self) -> Contract {
        match self.range(8) {
            0..=2 => Contract::Named(NamedPred::Number),
            3 => Contract::Named(NamedPred::Positive),
            4 => Contract::Named(NamedPred::Natural),
            5 => Contract::Named(NamedPred::Negative),
            _ => {
                let op = [Op::Lt, Op::Gt, Op::Le, Op::Ge, Op::Eq][self.range(5) as usize];
                let k = self.rng.gen_range(-2..=6);
                Contract::Flat(Box::new(Term::lam(
                    "w",
                    Term::Op(op, Box::new(Term::var("w")), Box::new(Term::int(k))),
                )))
            }
        }
    }

    fn str_leaf(&mut self) -> Contract {
        if self.range(4) == 0 {
            Contract::Flat(Box::new(Term::lam("w", Term::bool(true))))
        } else {
            Contract::Named(NamedPred::String_)
        }
    }

    fn alternation(&mut self, ty: &Ty, cdepth: u32) -> Contract {
        self.alt_budget -= 1;
        let l = self.contract(ty, cdepth - 1);
        let r = self.contract(ty, cdepth - 1);
        if self.range(2) == 0 {
            Contract::And(Box::new(l), Box::new(r))
        } else {
            Contract::Or(Box::new(l), Box::new(r))
        }
    }

    fn contract(&mut self, ty: &Ty, cdepth: u32) -> Contract {
        match ty {
            Ty::Int => {
                if cdepth > 0 && self.alt_budget > 0 && self.range(4) == 0 {
                    return self.alternation(ty, cdepth);
                }
                self.int_leaf()
            }
            Ty::Str => {
                if cdepth > 0 && self.alt_budget > 0 && self.range(5) == 0 {
                    return self.alternation(ty, cdepth);
                }
                self.str_leaf()
            }
            Ty::Bool => Contract::Flat(Box::new(Term::lam("w", Term::bool(true)))),
            Ty::Fun(a, b) => {
                if cdepth > 0 && self.alt_budget > 0 && self.range(5) == 0 {
                    return self.alternation(ty, cdepth);
                }
                if cdepth > 0 && **a == Ty::Int && **b == Ty::Int && self.range(5) == 0 {
                    // A dependent contract: the result must be at least
                    // as large as the argument.
                    let dom = self.int_leaf();
                    let range = Contract::Flat(Box::new(Term::lam(
                        "u",
                        Term::Op(Op::Ge, Box::new(Term::var("u")), Box::new(Term::var("w"))),
                    )));
                    return Contract::Dep(
                        "w".to_string(),
                        Box::new(Contract::Func(Box::new(dom), Box::new(range))),
                    );
                }
                let dom = self.contract(a, cdepth.saturating_sub(1));
                let range = self.contract(b, cdepth.saturating_sub(1));
                Contract::Func(Box::new(dom), Box::new(range))
            }
        }
    }
}

/// Builds the `index`-th term of the stream owned by `seed`.  The
/// same `(seed, index, config)` triple always yields the same term.
pub fn generate_term(seed: u64, index: u32, cfg: &GenConfig) -> Term {
    let case_seed = splitmix64(seed ^ splitmix64(0xC0FF_EE00 ^ u64::from(index)));
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(case_seed),
        cfg,
        labels_left: cfg.label_budget,
        next_label: 0,
        next_var: 0,
        alt_budget: 3,
    };
    let ty = match g.range(5) {
        0..=2 => Ty::Int,
        3 => Ty::Bool,
        _ => Ty::Str,
    };
    g.term(&mut Vec::new(), &ty, cfg.term_depth)
}

/// [`generate_term`] followed by the print/parse round trip, which
/// applies source validation and contract normalization exactly as for
/// a hand-written file.
pub fn generate_program(seed: u64, index: u32, cfg: &GenConfig) -> SourceProgram {
    let term = generate_term(seed, index, cfg);
    let text = print_term(&term);
    let origin = format!("<fuzz seed={seed} case={index}>");
    parse_source_named(&text, &origin).expect("generated program must be valid source")
}
