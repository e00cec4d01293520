//! Boundary representations of groups acting on regular trees.
//!
//! Vertices of the `(q+1)`-regular tree are reduced words over a fixed root,
//! ends are infinite words, and the boundary carries the visual measure from
//! the root. Given an operator `alpha` with `||alpha|| < 2 sqrt(q)` the crate
//! builds `tau = phi(alpha)` and the representation
//! `(pi(g) v)(xi) = tau^{B_xi(x0, g x0)} v(g^{-1} xi)` on step functions, and
//! checks its structural properties with exact measure arithmetic.

pub mod automorphism;
pub mod calculus;
pub mod error;
pub mod measure;
pub mod representation;
pub mod rng;
pub mod suites;
pub mod tree;

pub use automorphism::{random_rooted, random_rooted_with, Generator, Letter, Portrait, TreeAutomorphism};
pub use calculus::{build_pair, guard_spectrum, CMatrix, CVector, GuardReport, MatrixOperator, OperatorPair};
pub use error::{Error, Result};
pub use measure::{
    orbit_cells, orbit_merge_under_pruning, rn_cocycle, EndCell, Measure, OrbitCell, OrbitPartition, PartitionMap, RnRatio,
};
pub use representation::{
    alpha_via_rep, fixed_space_report, haar_average_fix, haar_average_k, halftree_element, invariant_lift_check, pi_apply,
    CellValue, FixedSpaceReport, QVector, StepFunction,
};
pub use suites::{verify, Counterexample, SuiteConfig, SuiteName, SuiteReport, VerifyReport};
pub use tree::{
    boundary_vertices, closed_neighborhood, distance, geodesic, is_complete, median, prune, FiniteSubtree, Pruning,
    TreeParams, Vertex,
};
