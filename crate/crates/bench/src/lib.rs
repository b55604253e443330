//! Shared fixtures for the benchmarks in `benches/`.

use std::path::PathBuf;

use intineq::{parse_problem, Problem};

pub fn problems_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../problems")
}

/// Loads a problem document from the repository's `problems/` directory.
pub fn load(name: &str) -> Problem {
    let text = std::fs::read_to_string(problems_dir().join(name))
        .unwrap_or_else(|e| panic!("reading {name}: {e}"));
    parse_problem(&text).unwrap_or_else(|e| panic!("parsing {name}: {e}"))
}
