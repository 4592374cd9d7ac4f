// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

pub mod invariants;
pub mod multipliers;

use std::path::PathBuf;

use drohs::io::{load_case, load_solution, SolutionFile};
use drohs_core::NetworkCase;

pub fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn case_path(name: &str) -> PathBuf {
    root().join("fixtures/cases").join(format!("{name}.json"))
}

pub fn case(name: &str) -> NetworkCase {
    load_case(&case_path(name)).unwrap()
}

pub fn reference_path(name: &str) -> PathBuf {
    root().join("fixtures/reference").join(format!("{name}.json"))
}

pub fn reference(name: &str) -> SolutionFile {
    load_solution(&reference_path(name)).unwrap()
}

/// Every bundled case, smallest first.
pub const ALL: &[&str] = &["case3", "case4", "case9", "case14", "case24", "case30", "case39", "case57", "case118", "case300"];
