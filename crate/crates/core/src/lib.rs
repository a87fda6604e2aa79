//! Typed dependency parsing toolkit.
//!
//! The crate parses sentences directly into Basic Stanford-style dependency
//! trees with graph-based or transition-based parsers, rewrites trees into
//! CCprocessed graphs, trains stacked parsers and measures accuracy and
//! throughput.

#![cfg_attr(test, allow(clippy::cloned_ref_to_slice_refs))]

use thiserror::Error;

pub mod eval;
pub mod features;
pub mod fixtures;
pub mod graph_parser;
pub mod io;
pub mod learn;
pub mod sd_transform;
pub mod sentence;
pub mod stacking;
pub mod transition_parser;
pub mod tree;

pub use sentence::{Sentence, Token};
pub use tree::{
    is_projective, tree_to_graph, validate_tree, DependencyArc, DependencyGraph, DependencyTree,
    TreeError,
};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tree(#[from] TreeError),

    #[error("invalid token: {0}")]
    InvalidToken(String),

    #[error("{what}: expected {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid feature request: {0}")]
    Feature(String),

    #[error("invalid transition: {0}")]
    Transition(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("unsupported model format version {found} (expected {expected})")]
    Version { expected: u16, found: u16 },

    #[error("training error: {0}")]
    Training(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("benchmark error: {0}")]
    Bench(String),

    #[error("stacking error: {0}")]
    Stacking(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
