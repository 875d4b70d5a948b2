use thiserror::Error;

use crate::model::Action;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("state {state} outside 1..={cap}")]
    StateOutOfRange { state: u32, cap: u32 },

    #[error("uniformization constant {0} outside (0, 1]")]
    EpsilonOutOfRange(f64),

    #[error("policy covers {got} states, model has {expected}")]
    PolicyLength { expected: usize, got: usize },

    #[error("value iteration did not converge in {iterations} sweeps (span {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("policy induces {classes} recurrent classes; average-cost evaluation needs a unichain policy")]
    Multichain { classes: usize },

    #[error("singular evaluation system (pivot ratio {0:e})")]
    Singular(f64),

    #[error("policy iteration revisited an earlier policy after {0} iterations")]
    PolicyCycle(usize),

    #[error("closed-form analysis requires p_s = 1 (got {0})")]
    UnreliableChannel(f64),

    #[error("closed form not applicable: {0}")]
    NotApplicable(&'static str),

    #[error("threshold {threshold} below the shortest update duration {min}")]
    ThresholdTooSmall { threshold: u32, min: u32 },

    #[error("action {0} is not an update action")]
    NotAnUpdate(Action),

    #[error("invalid simulation config: {0}")]
    SimConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
