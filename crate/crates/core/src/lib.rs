//! Product homomorphism problem: structures, a homomorphism solver, the
//! reductions between tiling, multi-relation, single-relation and digraph
//! instances, and conjunctive-query definability.

pub mod error;
pub mod cli;
pub mod cq;
pub mod cqdef;
pub mod format;
pub mod normalform;
pub mod solver;
pub mod structure;
pub mod tiling;

pub use error::{Error, Result};
pub use solver::{
    decide_php, enumerate_homomorphisms, find_homomorphism, find_homomorphism_with, image_set, PhpAnswer,
    Propagation, SolverConfig, VariableOrder,
};
pub use structure::{
    binarize_unary, disjoint_union, product, projection, Homomorphism, PhpInstance, PointedStructure, ProductIndex,
    Signature, Structure, DEFAULT_PRODUCT_GUARD,
};
