//! λ_Con: a call-by-value contract calculus with intersection and
//! union contracts, constraint-based blame assignment, and static
//! contract simplification.
//!
//! The crate provides:
//!
//! * [`ast`] — terms, contracts, and the operations on them
//!   (substitution, alpha-equivalence, contract normalization);
//! * [`syntax`] — an s-expression reader and printer for programs and
//!   contracts;
//! * [`constraint`] — the blame constraint store, its least-model
//!   solver, and blame assignment;
//! * [`eval`] — the small-step operational semantics with a
//!   predicate-check counter;
//! * [`subcontract`] — the context/subject subcontracting preorders;
//! * [`baseline`] — the baseline static transformation ⇝_B;
//! * [`subset`] — the fork-based subset transformation ⇝_S;
//! * [`join`] — the fork join ⇝_J, condensation ⇝_C, and the combined
//!   optimization pipeline.
//!
//! The crate is `no_std`-compatible (it only needs `alloc`); the
//! default `std` feature merely enables `std`-dependent conveniences in
//! downstream crates.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod ast;
pub mod baseline;
pub mod constraint;
pub mod eval;
pub mod join;
pub mod subcontract;
pub mod subset;
pub mod syntax;

pub use ast::{
    equivalent_mod_renaming, BlameRef, BlameVar, Constant, Contract, Label, NamedPred, Op,
    Polarity, Term,
};
pub use baseline::{
    baseline_normalize, baseline_step, is_canonical_baseline, is_canonical_baseline_with,
    BaselineCanonicity, TransformConfig, TransformError, TransformStep,
};
pub use constraint::{
    brute_force_least, Constraint, ConstraintDef, ConstraintStore, Facet, Interpretation,
};
pub use eval::{erase_contracts, max_blame_var, run, run_from, EvalConfig, Outcome};
pub use join::{
    condense_normalize, condense_step, ctx_join, join_normalize, join_step, optimize,
    predicate_census, struct_equiv, JoinError, OptimizeError, OptimizeReport, StructEquivWitness,
};
pub use subcontract::{naive_sub, ordinary_sub, ImplicationEnv, Subcontracting};
pub use subset::{
    count_branches, is_canonical_subset, is_canonical_subset_with, subset_normalize, subset_step,
    AssertionContext, ObservationTree, SubsetCanonicity, SubsetConfig, SubsetError,
};
pub use syntax::{parse_source, parse_source_named, parse_term, print_term, ParseError, SourceProgram};
