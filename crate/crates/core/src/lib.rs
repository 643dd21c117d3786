//! Model checking for MSO₁ with linear cardinality constraints, MSO
//! partitioning and c-balanced partitioning on graphs of bounded vertex cover
//! or neighbourhood diversity.
//!
//! The decision pipeline shrinks every vertex type to a size that depends only
//! on the formula, enumerates the satisfying assignments of the prefix set
//! variables on the shrunken graph, and asks a small integer program whether an
//! assignment extends to the original graph with the required cardinalities.

pub mod formula;
pub mod graph;
pub mod ilp;
pub mod mso_eval;
pub mod oracle;
pub mod solver;
pub mod partitioning;
pub mod balanced;
pub mod corpus;
pub mod cli;
