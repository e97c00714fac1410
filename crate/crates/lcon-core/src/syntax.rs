//! Concrete s-expression syntax for λ_Con.
//!
//! ```text
//! term:     integer | true | false | "string" | ident
//!         | (lam x M) | (M N) | (OP M N) | (if L M N)
//!         | (assert M #label C) | (assert M @n C)
//!         | (blame #label +|-) | (fork M N)
//! contract: (flat M) | Number? | String? | Positive? | Natural?
//!         | Negative? | (-> C D) | (dep (lam x C)) | (cap C D)
//!         | (cup C D) | top | bot
//! ```
//!
//! `OP` is one of `+ - * = < > <= >=`. Line comments start with `;`.
//! The running flat check that only exists mid-evaluation prints as
//! `(assert-eval V @n M)`.
//!
//! [`parse_source`] additionally enforces the source-program
//! restriction: no blame variables, blame terms, forks, or ⊤/⊥, and no
//! duplicate labels. Contracts are normalized on ingest (unions and
//! immediates are distributed out of intersections).

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::ast::{BlameRef, Constant, Contract, NamedPred, Op, Polarity, Term};

/// A parse or source-validation error with a 1-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl core::fmt::Display for ParseError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.msg)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ParseError {}

/// A parsed source program together with the labels it declares.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceProgram {
    pub term: Term,
    /// Where the program came from ("<inline>" when parsed from a string).
    pub origin: String,
    /// All blame labels, pairwise distinct.
    pub labels: BTreeSet<String>,
}

// ---------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    Atom(String),
    Str(String),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn err<T>(line: usize, col: usize, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line,
        col,
        msg: msg.into(),
    })
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        let bump = |c: char, line: &mut usize, col: &mut usize| {
            if c == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        };
        match c {
            ';' => {
                while let Some(&c) = chars.peek() {
                    chars.next();
                    bump(c, &mut line, &mut col);
                    if c == '\n' {
                        break;
                    }
                }
            }
            c if c.is_whitespace() => {
                chars.next();
                bump(c, &mut line, &mut col);
            }
            '(' => {
                chars.next();
                bump(c, &mut line, &mut col);
                out.push(Token {
                    tok: Tok::LParen,
                    line: tl,
                    col: tc,
                });
            }
            ')' => {
                chars.next();
                bump(c, &mut line, &mut col);
                out.push(Token {
                    tok: Tok::RParen,
                    line: tl,
                    col: tc,
                });
            }
            '"' => {
                chars.next();
                bump(c, &mut line, &mut col);
                let mut s = String::new();
                loop {
                    match chars.next() {
                        None => return err(tl, tc, "unterminated string literal"),
                        Some('"') => {
                            bump('"', &mut line, &mut col);
                            break;
                        }
                        Some('\\') => {
                            bump('\\', &mut line, &mut col);
                            match chars.next() {
                                Some('n') => s.push('\n'),
                                Some('t') => s.push('\t'),
                                Some('\\') => s.push('\\'),
                                Some('"') => s.push('"'),
                                Some(other) => {
                                    return err(
                                        line,
                                        col,
                                        format!("unknown escape '\\{other}' in string"),
                                    )
                                }
                                None => return err(tl, tc, "unterminated string literal"),
                            }
                            bump('x', &mut line, &mut col);
                        }
                        Some(c) => {
                            bump(c, &mut line, &mut col);
                            s.push(c);
                        }
                    }
                }
                out.push(Token {
                    tok: Tok::Str(s),
                    line: tl,
                    col: tc,
                });
            }
            _ => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' || c == '"' {
                        break;
                    }
                    s.push(c);
                    chars.next();
                    bump(c, &mut line, &mut col);
                }
                out.push(Token {
                    tok: Tok::Atom(s),
                    line: tl,
                    col: tc,
                });
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// Reader: tokens -> s-expression tree
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
enum Sexp {
    Atom(String, usize, usize),
    Str(String, usize, usize),
    List(Vec<Sexp>, usize, usize),
}

impl Sexp {
    fn pos(&self) -> (usize, usize) {
        match self {
            Sexp::Atom(_, l, c) | Sexp::Str(_, l, c) | Sexp::List(_, l, c) => (*l, *c),
        }
    }
}

fn read_sexp(tokens: &[Token], at: &mut usize) -> Result<Sexp, ParseError> {
    let Some(t) = tokens.get(*at) else {
        return err(0, 0, "unexpected end of input");
    };
    *at += 1;
    match &t.tok {
        Tok::Atom(s) => Ok(Sexp::Atom(s.clone(), t.line, t.col)),
        Tok::Str(s) => Ok(Sexp::Str(s.clone(), t.line, t.col)),
        Tok::RParen => err(t.line, t.col, "unexpected ')'"),
        Tok::LParen => {
            let mut items = Vec::new();
            loop {
                match tokens.get(*at) {
                    None => return err(t.line, t.col, "unclosed '('"),
                    Some(tt) if tt.tok == Tok::RParen => {
                        *at += 1;
                        return Ok(Sexp::List(items, t.line, t.col));
                    }
                    Some(_) => items.push(read_sexp(tokens, at)?),
                }
            }
        }
    }
}

// ---------------------------------------------------------------------
// Parser: s-expressions -> Term / Contract
// ---------------------------------------------------------------------

fn is_int_atom(s: &str) -> bool {
    let t = s.strip_prefix('-').unwrap_or(s);
    !t.is_empty() && t.chars().all(|c| c.is_ascii_digit())
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'' || c == '?' || c == '!')
}

const RESERVED: &[&str] = &[
    "lam", "if", "assert", "assert-eval", "blame", "fork", "flat", "dep", "cap", "cup", "top",
    "bot", "true", "false",
];

fn parse_binder(s: &Sexp) -> Result<String, ParseError> {
    let (l, c) = s.pos();
    match s {
        Sexp::Atom(a, _, _)
            if is_ident(a) && !RESERVED.contains(&a.as_str()) && NamedPred::from_name(a).is_none() =>
        {
            Ok(a.clone())
        }
        _ => err(l, c, "expected a variable name"),
    }
}

fn parse_blame_ref(s: &Sexp) -> Result<BlameRef, ParseError> {
    let (l, c) = s.pos();
    if let Sexp::Atom(a, _, _) = s {
        if let Some(name) = a.strip_prefix('#') {
            if !name.is_empty() && is_ident(name) {
                return Ok(BlameRef::Label(name.to_string()));
            }
            return err(l, c, format!("invalid blame label '{a}'"));
        }
        if let Some(num) = a.strip_prefix('@') {
            if let Ok(n) = num.parse::<u32>() {
                return Ok(BlameRef::Var(n));
            }
            return err(l, c, format!("invalid blame variable '{a}'"));
        }
    }
    err(l, c, "expected a blame label (#name) or variable (@n)")
}

fn parse_term_sexp(s: &Sexp) -> Result<Term, ParseError> {
    let (l, c) = s.pos();
    match s {
        Sexp::Str(v, _, _) => Ok(Term::Const(Constant::Str(v.clone()))),
        Sexp::Atom(a, _, _) => {
            if a == "true" {
                return Ok(Term::bool(true));
            }
            if a == "false" {
                return Ok(Term::bool(false));
            }
            if is_int_atom(a) {
                return a
                    .parse::<i64>()
                    .map(Term::int)
                    .or_else(|_| err(l, c, format!("integer literal '{a}' out of range")));
            }
            if is_ident(a) && !RESERVED.contains(&a.as_str()) && NamedPred::from_name(a).is_none() {
                return Ok(Term::Var(a.clone()));
            }
            err(l, c, format!("unexpected atom '{a}' in term position"))
        }
        Sexp::List(items, _, _) => {
            let head = items.first().and_then(|h| match h {
                Sexp::Atom(a, _, _) => Some(a.as_str()),
                _ => None,
            });
            match head {
                Some("lam") => {
                    if items.len() != 3 {
                        return err(l, c, "lam expects (lam x M)");
                    }
                    let x = parse_binder(&items[1])?;
                    let body = parse_term_sexp(&items[2])?;
                    Ok(Term::Lam(x, Box::new(body)))
                }
                Some("if") => {
                    if items.len() != 4 {
                        return err(l, c, "if expects (if L M N)");
                    }
                    Ok(Term::if_(
                        parse_term_sexp(&items[1])?,
                        parse_term_sexp(&items[2])?,
                        parse_term_sexp(&items[3])?,
                    ))
                }
                Some("assert") => {
                    if items.len() != 4 {
                        return err(l, c, "assert expects (assert M b C)");
                    }
                    let subject = parse_term_sexp(&items[1])?;
                    let blame = parse_blame_ref(&items[2])?;
                    let contract = parse_contract_sexp(&items[3])?;
                    Ok(Term::assert(subject, blame, contract))
                }
                Some("assert-eval") => {
                    if items.len() != 4 {
                        return err(l, c, "assert-eval expects (assert-eval V @n M)");
                    }
                    let value = parse_term_sexp(&items[1])?;
                    let BlameRef::Var(var) = parse_blame_ref(&items[2])? else {
                        return err(l, c, "assert-eval requires a blame variable");
                    };
                    let pred = parse_term_sexp(&items[3])?;
                    Ok(Term::PredEval {
                        value: Box::new(value),
                        var,
                        pred: Box::new(pred),
                    })
                }
                Some("blame") => {
                    if items.len() != 3 {
                        return err(l, c, "blame expects (blame #label +|-)");
                    }
                    let BlameRef::Label(label) = parse_blame_ref(&items[1])? else {
                        return err(l, c, "blame requires a label, not a variable");
                    };
                    let pol = match &items[2] {
                        Sexp::Atom(a, _, _) if a == "+" => Polarity::Positive,
                        Sexp::Atom(a, _, _) if a == "-" => Polarity::Negative,
                        other => {
                            let (pl, pc) = other.pos();
                            return err(pl, pc, "blame polarity must be + or -");
                        }
                    };
                    Ok(Term::Blame(label, pol))
                }
                Some("fork") => {
                    if items.len() != 3 {
                        return err(l, c, "fork expects (fork M N)");
                    }
                    Ok(Term::Fork(
                        Box::new(parse_term_sexp(&items[1])?),
                        Box::new(parse_term_sexp(&items[2])?),
                    ))
                }
                Some(op) if Op::from_symbol(op).is_some() => {
                    if items.len() != 3 {
                        return err(l, c, format!("operator {op} expects two operands"));
                    }
                    Ok(Term::op(
                        Op::from_symbol(op).unwrap(),
                        parse_term_sexp(&items[1])?,
                        parse_term_sexp(&items[2])?,
                    ))
                }
                _ => {
                    if items.len() != 2 {
                        return err(l, c, "application expects (M N)");
                    }
                    Ok(Term::app(
                        parse_term_sexp(&items[0])?,
                        parse_term_sexp(&items[1])?,
                    ))
                }
            }
        }
    }
}

fn parse_contract_sexp(s: &Sexp) -> Result<Contract, ParseError> {
    let (l, c) = s.pos();
    match s {
        Sexp::Str(_, _, _) => err(l, c, "string literal in contract position"),
        Sexp::Atom(a, _, _) => {
            if a == "top" {
                return Ok(Contract::Top);
            }
            if a == "bot" {
                return Ok(Contract::Bot);
            }
            if let Some(p) = NamedPred::from_name(a) {
                return Ok(Contract::Named(p));
            }
            err(l, c, format!("unexpected atom '{a}' in contract position"))
        }
        Sexp::List(items, _, _) => {
            let head = items.first().and_then(|h| match h {
                Sexp::Atom(a, _, _) => Some(a.as_str()),
                _ => None,
            });
            match head {
                Some("flat") => {
                    if items.len() != 2 {
                        return err(l, c, "flat expects (flat M)");
                    }
                    Ok(Contract::Flat(Box::new(parse_term_sexp(&items[1])?)))
                }
                Some("->") => {
                    if items.len() != 3 {
                        return err(l, c, "-> expects (-> C D)");
                    }
                    Ok(Contract::func(
                        parse_contract_sexp(&items[1])?,
                        parse_contract_sexp(&items[2])?,
                    ))
                }
                Some("dep") => {
                    if items.len() != 2 {
                        return err(l, c, "dep expects (dep (lam x C))");
                    }
                    let Sexp::List(inner, il, ic) = &items[1] else {
                        let (pl, pc) = items[1].pos();
                        return err(pl, pc, "dep expects (dep (lam x C))");
                    };
                    if inner.len() != 3 || !matches!(&inner[0], Sexp::Atom(a, _, _) if a == "lam") {
                        return err(*il, *ic, "dep expects (dep (lam x C))");
                    }
                    let x = parse_binder(&inner[1])?;
                    let body = parse_contract_sexp(&inner[2])?;
                    Ok(Contract::Dep(x, Box::new(body)))
                }
                Some("cap") => {
                    if items.len() != 3 {
                        return err(l, c, "cap expects (cap C D)");
                    }
                    Ok(Contract::and(
                        parse_contract_sexp(&items[1])?,
                        parse_contract_sexp(&items[2])?,
                    ))
                }
                Some("cup") => {
                    if items.len() != 3 {
                        return err(l, c, "cup expects (cup C D)");
                    }
                    Ok(Contract::or(
                        parse_contract_sexp(&items[1])?,
                        parse_contract_sexp(&items[2])?,
                    ))
                }
                _ => err(l, c, "expected a contract form"),
            }
        }
    }
}

/// Parses a term of the full intermediate language (asserts with blame
/// variables, blame terms, forks, and ⊤/⊥ are all allowed). Contracts
/// are normalized.
pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    let tokens = lex(text)?;
    if tokens.is_empty() {
        return err(1, 1, "empty input");
    }
    let mut at = 0usize;
    let sexp = read_sexp(&tokens, &mut at)?;
    if let Some(extra) = tokens.get(at) {
        return err(extra.line, extra.col, "trailing input after term");
    }
    Ok(normalize_contracts(parse_term_sexp(&sexp)?))
}

/// Normalizes every contract in the term (distributes unions out of
/// intersections and rotates immediate operands to the left).
pub fn normalize_contracts(t: Term) -> Term {
    match t {
        Term::Assert {
            subject,
            blame,
            contract,
        } => Term::Assert {
            subject: Box::new(normalize_contracts(*subject)),
            blame,
            contract: contract.normalize_deep(),
        },
        Term::Lam(x, b) => Term::Lam(x, Box::new(normalize_contracts(*b))),
        Term::App(f, a) => Term::App(
            Box::new(normalize_contracts(*f)),
            Box::new(normalize_contracts(*a)),
        ),
        Term::Op(o, a, b) => Term::Op(
            o,
            Box::new(normalize_contracts(*a)),
            Box::new(normalize_contracts(*b)),
        ),
        Term::If(c, a, b) => Term::If(
            Box::new(normalize_contracts(*c)),
            Box::new(normalize_contracts(*a)),
            Box::new(normalize_contracts(*b)),
        ),
        Term::PredEval { value, var, pred } => Term::PredEval {
            value: Box::new(normalize_contracts(*value)),
            var,
            pred: Box::new(normalize_contracts(*pred)),
        },
        Term::Fork(a, b) => Term::Fork(
            Box::new(normalize_contracts(*a)),
            Box::new(normalize_contracts(*b)),
        ),
        leaf @ (Term::Const(_) | Term::Var(_) | Term::Blame(_, _)) => leaf,
    }
}

impl Contract {
    fn normalize_deep(self) -> Contract {
        // `normalize` already recurses through contract structure; flat
        // predicates may contain asserts of their own.
        match self.normalize() {
            Contract::Flat(m) => Contract::Flat(Box::new(normalize_contracts(*m))),
            Contract::Func(d, r) => Contract::func(d.normalize_deep(), r.normalize_deep()),
            Contract::Dep(x, b) => Contract::Dep(x, Box::new(b.normalize_deep())),
            Contract::And(a, b) => Contract::and(a.normalize_deep(), b.normalize_deep()),
            Contract::Or(a, b) => Contract::or(a.normalize_deep(), b.normalize_deep()),
            leaf => leaf,
        }
    }
}

/// Checks the source-program restriction and collects labels.
fn validate_source(t: &Term, labels: &mut BTreeSet<String>) -> Result<(), ParseError> {
    match t {
        Term::Const(_) | Term::Var(_) => Ok(()),
        Term::Lam(_, b) => validate_source(b, labels),
        Term::App(f, a) => {
            validate_source(f, labels)?;
            validate_source(a, labels)
        }
        Term::Op(_, a, b) => {
            validate_source(a, labels)?;
            validate_source(b, labels)
        }
        Term::If(c, a, b) => {
            validate_source(c, labels)?;
            validate_source(a, labels)?;
            validate_source(b, labels)
        }
        Term::Assert {
            subject,
            blame,
            contract,
        } => {
            let BlameRef::Label(label) = blame else {
                return err(0, 0, "blame variables (@n) are not allowed in source programs");
            };
            if !labels.insert(label.clone()) {
                return err(0, 0, format!("duplicate blame label '#{label}'"));
            }
            validate_source(subject, labels)?;
            validate_source_contract(contract, labels)
        }
        Term::PredEval { .. } => err(0, 0, "assert-eval is not allowed in source programs"),
        Term::Blame(_, _) => err(0, 0, "blame terms are not allowed in source programs"),
        Term::Fork(_, _) => err(0, 0, "fork is not allowed in source programs"),
    }
}

fn validate_source_contract(c: &Contract, labels: &mut BTreeSet<String>) -> Result<(), ParseError> {
    match c {
        Contract::Flat(m) => validate_source(m, labels),
        Contract::Named(_) => Ok(()),
        Contract::Top => err(0, 0, "top is not allowed in source programs"),
        Contract::Bot => err(0, 0, "bot is not allowed in source programs"),
        Contract::Func(d, r) => {
            validate_source_contract(d, labels)?;
            validate_source_contract(r, labels)
        }
        Contract::Dep(_, b) => validate_source_contract(b, labels),
        Contract::And(l, r) | Contract::Or(l, r) => {
            validate_source_contract(l, labels)?;
            validate_source_contract(r, labels)
        }
    }
}

/// Parses a source program: the restricted language without
/// intermediate forms, with pairwise-distinct labels.
pub fn parse_source(text: &str) -> Result<SourceProgram, ParseError> {
    parse_source_named(text, "<inline>")
}

/// [`parse_source`] with an explicit origin (e.g. a file path) for
/// error reporting and reports.
pub fn parse_source_named(text: &str, origin: &str) -> Result<SourceProgram, ParseError> {
    let term = parse_term(text)?;
    let mut labels = BTreeSet::new();
    validate_source(&term, &mut labels)?;
    Ok(SourceProgram {
        term,
        origin: origin.to_string(),
        labels,
    })
}

// ---------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

/// Renders a blame reference (`#label` or `@n`).
pub fn print_blame_ref(b: &BlameRef) -> String {
    match b {
        BlameRef::Label(l) => format!("#{l}"),
        BlameRef::Var(v) => format!("@{v}"),
    }
}

/// Prints a term in the concrete syntax (single line, canonical
/// single-space separators).
pub fn print_term(t: &Term) -> String {
    let mut s = String::new();
    write_term(t, &mut s);
    s
}

fn write_term(t: &Term, out: &mut String) {
    match t {
        Term::Const(Constant::Int(n)) => out.push_str(&n.to_string()),
        Term::Const(Constant::Bool(b)) => out.push_str(if *b { "true" } else { "false" }),
        Term::Const(Constant::Str(s)) => {
            out.push('"');
            out.push_str(&escape(s));
            out.push('"');
        }
        Term::Var(x) => out.push_str(x),
        Term::Lam(x, b) => {
            out.push_str("(lam ");
            out.push_str(x);
            out.push(' ');
            write_term(b, out);
            out.push(')');
        }
        Term::App(f, a) => {
            out.push('(');
            write_term(f, out);
            out.push(' ');
            write_term(a, out);
            out.push(')');
        }
        Term::Op(op, a, b) => {
            out.push('(');
            out.push_str(op.symbol());
            out.push(' ');
            write_term(a, out);
            out.push(' ');
            write_term(b, out);
            out.push(')');
        }
        Term::If(c, a, b) => {
            out.push_str("(if ");
            write_term(c, out);
            out.push(' ');
            write_term(a, out);
            out.push(' ');
            write_term(b, out);
            out.push(')');
        }
        Term::Assert {
            subject,
            blame,
            contract,
        } => {
            out.push_str("(assert ");
            write_term(subject, out);
            out.push(' ');
            out.push_str(&print_blame_ref(blame));
            out.push(' ');
            write_contract(contract, out);
            out.push(')');
        }
        Term::PredEval { value, var, pred } => {
            out.push_str("(assert-eval ");
            write_term(value, out);
            out.push_str(&format!(" @{var} "));
            write_term(pred, out);
            out.push(')');
        }
        Term::Blame(l, p) => {
            out.push_str("(blame #");
            out.push_str(l);
            out.push_str(match p {
                Polarity::Positive => " +)",
                Polarity::Negative => " -)",
            });
        }
        Term::Fork(l, r) => {
            out.push_str("(fork ");
            write_term(l, out);
            out.push(' ');
            write_term(r, out);
            out.push(')');
        }
    }
}

/// Prints a contract in the concrete syntax.
pub fn print_contract(c: &Contract) -> String {
    let mut s = String::new();
    write_contract(c, &mut s);
    s
}

fn write_contract(c: &Contract, out: &mut String) {
    match c {
        Contract::Flat(m) => {
            out.push_str("(flat ");
            write_term(m, out);
            out.push(')');
        }
        Contract::Named(p) => out.push_str(p.name()),
        Contract::Top => out.push_str("top"),
        Contract::Bot => out.push_str("bot"),
        Contract::Func(d, r) => {
            out.push_str("(-> ");
            write_contract(d, out);
            out.push(' ');
            write_contract(r, out);
            out.push(')');
        }
        Contract::Dep(x, b) => {
            out.push_str("(dep (lam ");
            out.push_str(x);
            out.push(' ');
            write_contract(b, out);
            out.push_str("))");
        }
        Contract::And(l, r) => {
            out.push_str("(cap ");
            write_contract(l, out);
            out.push(' ');
            write_contract(r, out);
            out.push(')');
        }
        Contract::Or(l, r) => {
            out.push_str("(cup ");
            write_contract(l, out);
            out.push(' ');
            write_contract(r, out);
            out.push(')');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::alpha_eq;

    #[test]
    fn parses_simple_application() {
        let t = parse_term("((lam x x) 1)").unwrap();
        assert_eq!(t, Term::app(Term::lam("x", Term::var("x")), Term::int(1)));
    }

    #[test]
    fn parses_curried_contract_assertion() {
        let t = parse_term(
            "(assert (lam x (lam y (+ x y))) #p (-> Number? (-> Number? Number?)))",
        )
        .unwrap();
        let num = Contract::Named(NamedPred::Number);
        let expected = Term::assert_label(
            Term::lam("x", Term::lam("y", Term::op(Op::Add, Term::var("x"), Term::var("y")))),
            "p",
            Contract::func(num.clone(), Contract::func(num.clone(), num)),
        );
        assert_eq!(t, expected);
    }

    #[test]
    fn source_rejects_intermediate_forms() {
        assert!(parse_source("(blame #l +)").is_err());
        assert!(parse_source("(fork 1 2)").is_err());
        assert!(parse_source("(assert 1 @3 Number?)").is_err());
        assert!(parse_source("(assert 1 #l top)").is_err());
        assert!(parse_source("(assert 1 #l bot)").is_err());
        // Duplicate labels are rejected.
        assert!(parse_source("((assert 1 #l Number?) (assert 2 #l Number?))").is_err());
        // But the same forms are fine as intermediate terms.
        assert!(parse_term("(blame #l +)").is_ok());
        assert!(parse_term("(assert 1 @3 bot)").is_ok());
    }

    #[test]
    fn prints_blame_variable_asserts() {
        let t = Term::assert_var(Term::int(1), 3, Contract::Bot);
        assert_eq!(print_term(&t), "(assert 1 @3 bot)");
    }

    #[test]
    fn round_trips_intermediate_forms() {
        let sources = [
            "((lam x x) 1)",
            "(assert (lam x x) #id (-> Number? Number?))",
            "(if (< 1 2) \"yes\" \"no\")",
            "(fork (assert 1 @1 Number?) (assert 1 @2 String?))",
            "(assert (lam x (+ x 1)) @4 (dep (lam y (flat (lam r (> r y))))))",
            "(blame #outer -)",
            "(assert-eval 5 @2 ((lam v (> v 0)) 5))",
            "(assert 3 #n (cap Number? (cup Positive? Negative?)))",
            "(- 0 7)",
            "-7",
        ];
        for src in sources {
            let t = parse_term(src).unwrap();
            let printed = print_term(&t);
            let reparsed = parse_term(&printed).unwrap();
            assert!(
                alpha_eq(&t, &reparsed),
                "round trip failed for {src}: printed {printed}"
            );
        }
    }

    #[test]
    fn comments_and_whitespace_are_ignored() {
        let t = parse_term("; a comment\n  ( (lam x x) ; id\n    42 )\n").unwrap();
        assert_eq!(t, Term::app(Term::lam("x", Term::var("x")), Term::int(42)));
    }

    #[test]
    fn normalizes_contracts_on_ingest() {
        // (cap (cup Positive? Negative?) Number?) distributes to a
        // union of intersections.
        let t = parse_term("(assert 1 #l (cap (cup Positive? Negative?) Number?))").unwrap();
        let Term::Assert { contract, .. } = t else {
            panic!()
        };
        assert_eq!(
            contract,
            Contract::or(
                Contract::and(
                    Contract::Named(NamedPred::Positive),
                    Contract::Named(NamedPred::Number)
                ),
                Contract::and(
                    Contract::Named(NamedPred::Negative),
                    Contract::Named(NamedPred::Number)
                ),
            )
        );
    }

    #[test]
    fn reports_error_positions() {
        let e = parse_term("((lam x x) ").unwrap_err();
        assert_eq!((e.line, e.col), (1, 1));
        let e = parse_term("(lam x x))").unwrap_err();
        assert_eq!((e.line, e.col), (1, 10));
    }
}
