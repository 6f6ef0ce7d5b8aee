//! Experience-based diagnosis: features built from measured traces, a decision
//! forest trained on labeled history, and permutation importances assembled
//! into an experience-based fault signature matrix.

mod features;
mod forest;
mod importance;
mod persist;

use thiserror::Error;

pub use features::{build_features, gini, trace_rows, FeatureMatrix, FEATURE_NAMES};
pub use forest::{train, Forest, ForestConfig, Node, Prediction, Tree};
pub use importance::{
    build_eb_fsm, build_eb_fsm_detailed, permutation_importance, stratified_split, EbFsmDetail,
    DEFAULT_IMPORTANCE_REPEATS, TRAIN_FRACTION,
};
pub use persist::{read_forest, write_forest, FORMAT_VERSION};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EbError {
    #[error("trace {0} has no label")]
    MissingLabel(usize),
    #[error("trace {0} contains no switch transition")]
    NoTransition(usize),
    #[error("class counts are all zero")]
    EmptyNode,
    #[error("training data contains a single class")]
    SingleClass,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("shape mismatch: expected {expected} features, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("no Healthy traces to serve as baseline")]
    MissingBaseline,
    #[error("invalid forest config: {0}")]
    InvalidConfig(String),
    #[error("invalid feature matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid forest: {0}")]
    InvalidForest(String),
    #[error("model file line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
