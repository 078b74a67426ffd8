use thiserror::Error;

/// Errors produced by graphtron-core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph has no actions")]
    EmptyGraph,
    #[error("action {action} is out of range for a graph with {n_actions} actions")]
    ActionOutOfRange { action: usize, n_actions: usize },
    #[error("action {0} has no incoming edge, its outcome can never be observed")]
    Unobservable(usize),
    #[error("label action set must be non-empty")]
    NoLabelActions,
    #[error("exact domination number is limited to {max} actions, got {got}")]
    TooManyActions { got: usize, max: usize },
    #[error("unknown graph kind `{0}` (expected one of: full, bandit, apple, label-efficient, spam-filter)")]
    UnknownGraphKind(String),
    #[error("unknown loss `{0}` (expected one of: logistic, smooth-hinge, hinge)")]
    UnknownLoss(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("gradient contains non-finite entries")]
    NonFiniteGradient,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("feedback references action {0} outside the out-neighbourhood of the played action")]
    FeedbackLeak(usize),
    #[error("learner `{learner}` cannot run on graph `{graph}`: {reason}")]
    Incompatible {
        learner: String,
        graph: String,
        reason: String,
    },
    #[error("graph file, line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
