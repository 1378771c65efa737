//! Stochastic optimal control on a star junction.
//!
//! - [`problem`]: geometry, coefficient families, assumption checks
//! - [`hamiltonian`] / [`junction`]: edge Hamiltonians and the junction program over the floored simplex
//! - [`pde`]: backward HJB solver with the nonlinear vertex condition, feedback extraction
//! - [`sim`]: Euler–Maruyama simulation with reflection, local time and random dispatch
//! - [`verify`]: Monte Carlo checks of the value function
//! - [`scenario`] / [`cli`]: JSON scenarios and the command line

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod hamiltonian;
pub mod junction;
pub mod pde;
pub mod problem;
pub mod scenario;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};
pub use junction::{JunctionEval, JunctionHamiltonian, SimplexWeights};
pub use pde::{extract_policy, solve_backward, FeedbackPolicy, SpaceTimeGrid, ValueGrid};
pub use problem::{validate_problem, ControlProblem, EdgePoint};
pub use scenario::Scenario;

#[cfg(test)]
mod testutil;
