//! Library surface of the `lcon` command-line driver.
//!
//! The binary in `src/main.rs` is a thin argument-parsing shell; all
//! behaviour lives here so that integration tests (and other tools)
//! can drive the same code paths directly:
//!
//! * [`pipeline`] — simplification at a chosen level plus outcome
//!   summaries shared by every subcommand;
//! * [`diff`] — the differential oracle comparing a program against
//!   its simplified form;
//! * [`generate`] — the type-directed random program generator;
//! * [`fuzz`] — the property harness built on [`diff`] and
//!   [`generate`], including the counterexample shrinker.

pub mod diff;
pub mod fuzz;
pub mod generate;
pub mod pipeline;

use std::path::{Path, PathBuf};

use lcon_core::{parse_source_named, SourceProgram};

/// Directory holding the example corpus that ships with the crate.
pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

/// Loads and parses a corpus program by file name (e.g.
/// `"addOne1.lcon"`).
pub fn load_corpus_program(name: &str) -> Result<SourceProgram, String> {
    let path = corpus_dir().join(name);
    load_program(&path)
}

/// Loads and parses a program from an arbitrary path.
pub fn load_program(path: &Path) -> Result<SourceProgram, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("{}: {}", path.display(), e))?;
    parse_source_named(&text, &path.display().to_string())
        .map_err(|e| format!("{}: {}", path.display(), e))
}

/// File names of every corpus program, in a stable order.
pub const CORPUS: &[&str] = &[
    "addOne1.lcon",
    "addOne1_call.lcon",
    "addOne2.lcon",
    "addOne2_call.lcon",
    "addOne3.lcon",
    "addOne3_call.lcon",
    "addOne4.lcon",
    "addOne4_call.lcon",
    "addOne6.lcon",
    "addOne6_call.lcon",
    "running_example.lcon",
    "running_example_call.lcon",
    "propagating_blame.lcon",
    "propagating_blame_call.lcon",
    "blame_domain.lcon",
];
