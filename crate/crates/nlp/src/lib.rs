//! Smooth nonlinear programming.
//!
//! Solves
//!
//! ```txt
//!     min f(z)   s.t.   h(z) = 0,   g(z) <= 0,   lower <= z <= upper
//! ```
//!
//! with a primal-dual interior-point iteration: inequalities are turned into
//! equalities with nonnegative slacks, slacks and bounds are handled by a
//! logarithmic barrier, and each iteration takes one Newton step on the
//! barrier KKT conditions followed by a backtracking line search on an
//! l1 exact-penalty merit function. The condensed KKT system is factorized
//! with a sparse LDL^T, so structured problems with a few hundred variables
//! solve in milliseconds.
//!
//! Problems may supply the exact Hessian of the Lagrangian; otherwise a damped
//! BFGS approximation is maintained.

mod bfgs;
mod check;
mod kkt;
mod problem;
mod solver;

pub use check::{check_gradients, check_hessian, GradientCheck};
pub use problem::{NlpProblem, Triplets};
pub use solver::{
    solve, solve_with_log, IterationLog, Multipliers, SolveOptions, SolveResult, SolveStatus,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NlpError {
    #[error("initial point has {got} entries, problem has {expected} variables")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("variable {index} has lower bound {lower} above upper bound {upper}")]
    InconsistentBounds {
        index: usize,
        lower: f64,
        upper: f64,
    },
}
