//! Dynamic facility location under cumulative customer demand.
//!
//! Customers accumulate unmet demand until they find an acceptable open
//! facility. This crate evaluates location policies under that dynamic, and
//! solves instances exactly (double-index and single-index MIPs, branch and
//! Benders cut, brute force, a loyal-customer assignment solver) and
//! heuristically (backward and forward greedy, a noncumulative heuristic and a
//! random baseline). The [`bench`] module generates instances and reports
//! comparison metrics.

pub mod bench;
pub mod benders;
pub mod error;
pub mod exact;
pub mod formulations;
pub mod heuristics;
pub mod model;

pub use error::{Error, Result};
pub use model::{
    accumulated_reward_coeff, evaluate_policy, expand_rank_based, scale_spawning, simulate_choice,
    validate_instance, EvaluationResult, Instance, LocationPolicy, Profile, RankBasedInstance,
    Violation,
};
