//! Rooted plane trees: storage, sampling, enumeration and the rotation
//! correspondence with binary trees.

mod binary;
mod enumerate;
mod plane;
mod sample;

pub use binary::{rotation_from_binary, rotation_to_binary, BinaryTree};
pub use enumerate::{catalan, enumerate_plane_trees, MAX_ENUMERATION_SIZE};
pub use plane::PlaneTree;
pub use sample::{geom_half, sample_ggw, sample_uniform_plane_tree, DEFAULT_SIZE_CAP};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("Galton-Watson tree exceeded the size cap of {cap} vertices")]
    CapExceeded { cap: usize },
    #[error("tree size must be at least 1")]
    EmptyTree,
    #[error("enumeration of size {n} refused (limit {MAX_ENUMERATION_SIZE})")]
    SizeTooLarge { n: usize },
    #[error("invalid preorder child-count sequence: {0}")]
    InvalidCode(String),
    #[error("invalid binary tree: {0}")]
    InvalidBinary(String),
}
