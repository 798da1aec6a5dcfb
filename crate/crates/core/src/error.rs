use thiserror::Error;

use crate::mdp::Diagnostic;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state index {state} out of range (num_states = {num_states})")]
    StateOutOfRange { state: usize, num_states: usize },

    #[error("action index {action} out of range (num_actions = {num_actions})")]
    ActionOutOfRange { action: usize, num_actions: usize },

    #[error("probability {value} at {context} is not in [0, 1]")]
    BadProbability { value: f64, context: String },

    #[error("transition row for state {state}, action {action} sums to {sum}")]
    TransitionRowSum {
        state: usize,
        action: usize,
        sum: f64,
    },

    #[error("policy weights at state {state} sum to {sum}")]
    PolicyRowSum { state: usize, sum: f64 },

    #[error("policy assigns weight to action {action} at state {state}, which has no transitions")]
    UndefinedAction { state: usize, action: usize },

    #[error("state {0} is both a goal and a fail state")]
    GoalFailOverlap(usize),

    #[error("no transition time given for edge {from} -> {to}")]
    MissingTime { from: usize, to: usize },

    #[error("transition time for edge {from} -> {to} must be >= 1")]
    ZeroTime { from: usize, to: usize },

    #[error("invalid chain: {}", join_diagnostics(.0))]
    InvalidChain(Vec<Diagnostic>),

    #[error("negative variance radicand {radicand} at state {state}")]
    NegativeVariance { state: usize, radicand: f64 },

    #[error("completion-time tail still {tail} at horizon cap {cap}")]
    HorizonCap { cap: usize, tail: f64 },

    #[error("invalid river configuration: {0}")]
    RiverConfig(String),

    #[error("model file: {0}")]
    ModelFile(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
