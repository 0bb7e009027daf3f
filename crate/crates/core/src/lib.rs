//! Deterministic simulator of a lending company's finances, run month by
//! month under a hard cash-survival constraint.
//!
//! An [`Episode`] owns the company state, replays exogenous macro and
//! industry series from a [`Scenario`], and exposes budgeted observation
//! tools, a free notepad, and one action per month. Every run is fully
//! determined by `(scenario, seed, decisions)` and is recorded as a
//! replayable JSONL [`Transcript`].

pub mod dynamics;
pub mod engine;
pub mod error;
pub mod fundraising;
pub mod ledger;
pub mod memory;
pub mod money;
pub mod rng;
pub mod scenario;
pub mod tools;
pub mod transcript;

pub use engine::{
    replay, terminal_score, Action, ActionOutcome, ActionResolution, Episode, EpisodeConfig,
    EpisodeSummary, Next, Observation, Phase, TurnRequest,
};
pub use error::{EngineError, ScenarioError};
pub use fundraising::Instrument;
pub use memory::MemoryOp;
pub use money::Money;
pub use scenario::{Scenario, ScenarioCatalog};
pub use tools::{ToolCall, ToolResult};
pub use transcript::{RecordKind, TerminalSummary, Transcript};
