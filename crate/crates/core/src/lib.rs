//! Graph total variation solvers with active-set driven forest preconditioning.
//!
//! The library solves `min_u G(u) + ||K u||_1` with `K = diag(w) * grad` on a
//! weighted graph through its dual `min_{||p||_inf <= 1} G*(-K^T p)`. Dual
//! steps are taken in a metric `T` built from a decomposition of the edge set
//! into forests, so each step reduces to exact TV problems on trees.

pub mod analysis;
pub mod error;
pub mod experiments;
pub mod forest;
pub mod graph;
pub mod precond;
pub mod problems;
pub mod solvers;
pub mod testkit;
pub mod treeprox;

pub use error::{Error, Result};
pub use forest::{Forest, ForestDecomposition, Tree};
pub use graph::{GridShape, WeightedGraph};
pub use precond::{DiagonalKind, Preconditioner};
pub use problems::{DataTerm, DeconvDataTerm, Kernel, RofDataTerm};
pub use solvers::{solve, Algorithm, ConvergenceTrace, PrecondStrategy, SolveConfig, SolveResult, StepRule};
