//! Causal DAGs: factorization, d-separation and data-based independence checks.

mod dag;
mod independence;

use thiserror::Error;

pub use dag::{Dag, Factor, Independence};
pub use independence::{
    check_independence, IndependenceTest, Statement, TestResult, Variable, Verdict, DEFAULT_BINS, MIN_STRATUM_ROWS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CausalError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),
    #[error("graph has a cycle through `{0}`")]
    Cycle(String),
    #[error("node `{0}` appears in more than one query set")]
    NotDisjoint(String),
    #[error("dag line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
