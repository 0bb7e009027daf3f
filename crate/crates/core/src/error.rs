use std::path::PathBuf;

use thiserror::Error;

use crate::scenario::ValidationReport;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{file}: month {month} missing from series")]
    MissingSeries { file: String, month: u32 },
    #[error("{file}: schema error: {detail}")]
    Schema { file: String, detail: String },
    #[error("scenario invariants violated:\n{0}")]
    InvariantViolation(ValidationReport),
    #[error("profile sums to {sum} months, horizon is {horizon}")]
    BadProfile { sum: u32, horizon: u32 },
    #[error("month {month} outside horizon {horizon}")]
    OutOfRange { month: u32, horizon: u32 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Errors raised by the episode engine. Every variant has a stable
/// machine-readable [`code`](EngineError::code).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("episode is over")]
    EpisodeOver,
    #[error("episode has not been started")]
    NotStarted,
    #[error("an action was already taken this month")]
    SecondAction,
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("tool budget of {limit} calls exhausted for this month")]
    BudgetExhausted { limit: u32 },
    #[error("bad assumptions: {0}")]
    BadAssumptions(String),
    #[error("fundraising amount must be positive")]
    NonPositiveAmount,
    #[error("unknown scenario '{0}'")]
    ScenarioNotFound(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("month {month} outside horizon {horizon}")]
    OutOfRange { month: u32, horizon: u32 },
    #[error("replay diverged: {0}")]
    ReplayMismatch(String),
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::EpisodeOver => "episode_over",
            EngineError::NotStarted => "not_started",
            EngineError::SecondAction => "second_action",
            EngineError::ContractViolation(_) => "contract_violation",
            EngineError::BudgetExhausted { .. } => "budget_exhausted",
            EngineError::BadAssumptions(_) => "bad_assumptions",
            EngineError::NonPositiveAmount => "non_positive_amount",
            EngineError::ScenarioNotFound(_) => "scenario_not_found",
            EngineError::InvalidRequest(_) => "invalid_request",
            EngineError::OutOfRange { .. } => "out_of_range",
            EngineError::ReplayMismatch(_) => "replay_mismatch",
        }
    }
}

impl From<ScenarioError> for EngineError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::OutOfRange { month, horizon } => {
                EngineError::OutOfRange { month, horizon }
            }
            other => EngineError::InvalidRequest(other.to_string()),
        }
    }
}
