//! Optimal preprocessing and transmission scheduling for an energy-aware
//! status-update device, cast as an average-cost semi-Markov decision process
//! over the Age of Information.
//!
//! * [`model`]: system parameters, actions, durations, energies, transitions.
//! * [`solver`]: uniformization, relative value iteration and structured
//!   relative policy iteration.
//! * [`structure`]: threshold and value-function property checks.
//! * [`reliable_channel`]: closed forms for an error-free channel.
//! * [`sim`]: Monte-Carlo simulation and exact stationary evaluation.

pub mod chain;
pub mod error;
pub mod model;
pub mod reliable_channel;
pub mod sim;
pub mod solver;
pub mod structure;

pub use error::{Error, Result};
pub use model::{Action, LinkBudget, Model, SystemParams, DEFAULT_AGE_CAP};
pub use reliable_channel::{CycleCosts, ReliableCaseAnalysis, ReliableChannel, ThresholdSet};
pub use sim::{
    simulate, stationary_average_cost, zero_wait_policy, Epoch, PolicySpec, SimConfig, SimStats,
    StationaryStats, Trajectory, BATCHES, RNG_ALGORITHM,
};
pub use solver::{
    policy_evaluation, relative_value_iteration, structured_relative_policy_iteration, Evaluation,
    Policy, RelativeValueIteration, SolverOptions, SolverResult, UniformizedMdp,
};
pub use structure::{
    check_uncapped_value_properties, check_value_properties, preferred_action,
    uncapped_check_states, verify_threshold_structure, StructureReport, ThresholdCheck,
    ValueChecks,
};
