//! Per-request computation allocation for cascaded recommendation serving.
//!
//! Requests pick one action (a computation quota) from an [`ActionSpace`] under a
//! total budget. A single multiplier `lambda` prices computation; each request then
//! takes `argmax_j Q_ij - lambda * q_j` independently. [`solve_lambda`] finds the
//! smallest `lambda` whose allocation fits the budget, and the [`controller`] lowers
//! a per-request cap when the serving system degrades.

pub mod allocation;
pub mod cli;
pub mod config;
pub mod controller;
pub mod error;
pub mod experiments;
pub mod gain;
pub mod logio;
pub mod oracle;
pub mod sim;
pub mod solver;

pub use allocation::{
    dual_mu, dual_value, evaluate, select_action, verify_assumptions, ActionRule, ActionSpace,
    AllocationProblem, AllocationSummary, Assignment, GainMatrix, GainSource,
};
pub use error::{DcafError, Result};
pub use solver::{adjust_budget, default_interval, lambda_sweep, solve_lambda, SolverConfig, SolverResult};
