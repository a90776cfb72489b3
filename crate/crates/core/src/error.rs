use thiserror::Error;

use crate::task::{ActionId, PrecedenceRule};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid task: {0}")]
    InvalidTask(String),

    #[error("precedence cycle among actions {0:?}")]
    PrecedenceCycle(Vec<ActionId>),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("unknown action {0}")]
    UnknownAction(ActionId),

    #[error("action {action} is exhausted (no repetitions remain)")]
    ExhaustedAction { action: ActionId },

    #[error("action {action} violates precedence {rule}")]
    PrecedenceViolation {
        action: ActionId,
        rule: PrecedenceRule,
    },

    #[error("trace has {actual} steps, task requires {expected}")]
    TraceLength { expected: usize, actual: usize },

    #[error("infeasible step {index}: {source}")]
    InfeasibleStep {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("state at step 0 has no latest action to featurize")]
    NoLatestAction,

    #[error("state graph exceeds cap of {cap} states")]
    GraphTooLarge { cap: usize },

    #[error("ratings cover {actual} actions, task has {expected}")]
    RatingsMismatch { expected: usize, actual: usize },

    #[error("missing ratings for actions {0:?}")]
    MissingRatings(Vec<ActionId>),

    #[error("rating for action {action} ({value}) outside [{min}, {max}]")]
    RatingOutOfBounds {
        action: ActionId,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error(
        "non-finite value during gradient ascent at iteration {iteration}; lower the learning rate"
    )]
    Divergence { iteration: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("terminal state has no next action")]
    TerminalState,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("degenerate test: {0}")]
    DegenerateTest(String),

    #[error("user {user}: {source}")]
    User {
        user: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{context}: {message}")]
    Format { context: String, message: String },
}

impl Error {
    pub(crate) fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            message: message.into(),
        }
    }
}
