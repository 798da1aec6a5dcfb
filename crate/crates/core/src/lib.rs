//! Success probability and the mean and standard deviation of
//! successful-episode duration for episodic Markov chains with integer
//! transition times.
//!
//! [`solver`] computes the per-state quantities by fixed-point iteration.
//! [`qdist`] (exact completion-time distribution) and [`monte_carlo`]
//! (simulation) are independent checks on it. [`river`] builds the
//! river-world benchmark.

pub mod cli;
pub mod error;
pub mod mdp;
pub mod model_file;
pub mod monte_carlo;
pub mod qdist;
pub mod report;
pub mod river;
pub mod solver;

pub use error::{Error, Result};
pub use mdp::{induce_chain, validate_chain, Chain, Diagnostic, Edge, Mdp, Policy, StateId};
pub use solver::{solve_all, SolveConfig, SolveResult};
