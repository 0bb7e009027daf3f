//! Line-delimited JSON episode transcripts.
//!
//! One record per event, `{"t": month, "kind": "...", "payload": {...}}`.
//! Record kinds and their payloads:
//!
//! | kind               | payload                                                        |
//! |--------------------|----------------------------------------------------------------|
//! | `episode_start`    | [`EpisodeStart`]                                                |
//! | `monthly_snapshot` | [`MonthlySnapshot`], written after each month's postings        |
//! | `env_feedback`     | [`EnvFeedback`], settlement arrivals posted this month          |
//! | `observation`      | [`Observation`](crate::engine::Observation) shown to the agent  |
//! | `tool_call`        | [`ToolCallRecord`], including budget rejections                 |
//! | `memory_op`        | [`MemoryOpRecord`]                                              |
//! | `action`           | [`ActionRecord`], exactly one per lived month                   |
//! | `terminal`         | [`TerminalSummary`]                                             |

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dynamics::OperationalIndicators;
use crate::engine::{Action, ActionResolution};
use crate::error::EngineError;
use crate::ledger::SettlementArrival;
use crate::memory::{MemoryOp, MemoryResult};
use crate::money::Money;
use crate::tools::{ToolCall, ToolResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    EpisodeStart,
    MonthlySnapshot,
    EnvFeedback,
    Observation,
    ToolCall,
    MemoryOp,
    Action,
    Terminal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptRecord {
    pub t: u32,
    pub kind: RecordKind,
    pub payload: Value,
}

impl TranscriptRecord {
    pub fn payload_as<T: DeserializeOwned>(&self) -> Result<T, EngineError> {
        serde_json::from_value(self.payload.clone()).map_err(|e| {
            EngineError::InvalidRequest(format!(
                "malformed {:?} payload at t={}: {e}",
                self.kind, self.t
            ))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStart {
    pub scenario_id: String,
    pub seed: u64,
    pub horizon: u32,
    pub agent_label: String,
    pub initial_cash: Money,
    pub initial_borrowers: u64,
    pub shares_outstanding: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonthlySnapshot {
    pub month_label: String,
    pub cash: Money,
    pub active_borrowers: u64,
    pub receivables: Money,
    pub debt: Money,
    pub revenue: Money,
    pub indicators: OperationalIndicators,
    pub n_tools: u64,
    pub alive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvFeedback {
    pub settlements: Vec<SettlementArrival>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub code: String,
    pub message: String,
}

impl From<&EngineError> for ErrorInfo {
    fn from(e: &EngineError) -> Self {
        ErrorInfo {
            code: e.code().into(),
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolCallRecord {
    pub request: ToolCall,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<ToolResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
    pub budget_remaining: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryOpRecord {
    pub request: MemoryOp,
    pub result: MemoryResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub request: Action,
    /// True when the turn ended without an action and was treated as a pass.
    pub coerced: bool,
    pub resolution: ActionResolution,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminalSummary {
    pub survived: bool,
    pub months_lived: u32,
    pub score: Money,
    pub ttm_revenue: Money,
    pub final_cash: Money,
    pub n_tools: u64,
    /// `multiple * ttm_revenue`; zero on death.
    pub valuation: Money,
    /// `lambda * n_tools`; zero on death.
    pub tool_penalty: Money,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Transcript {
    records: Vec<TranscriptRecord>,
}

impl Transcript {
    pub fn push<T: Serialize>(&mut self, t: u32, kind: RecordKind, payload: &T) {
        let payload = serde_json::to_value(payload).expect("transcript payloads are plain data");
        self.records.push(TranscriptRecord { t, kind, payload });
    }

    pub fn records(&self) -> &[TranscriptRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn of_kind(&self, kind: RecordKind) -> impl Iterator<Item = &TranscriptRecord> {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Transcript, EngineError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: TranscriptRecord = serde_json::from_str(line).map_err(|e| {
                EngineError::InvalidRequest(format!("transcript line {}: {e}", i + 1))
            })?;
            records.push(r);
        }
        Ok(Transcript { records })
    }

    pub fn write_to(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_jsonl())
    }

    pub fn read_from(path: &Path) -> Result<Transcript, EngineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EngineError::InvalidRequest(format!("{}: {e}", path.display())))?;
        Transcript::from_jsonl(&text)
    }

    pub fn start(&self) -> Result<EpisodeStart, EngineError> {
        self.of_kind(RecordKind::EpisodeStart)
            .next()
            .ok_or_else(|| {
                EngineError::InvalidRequest("transcript has no episode_start record".into())
            })?
            .payload_as()
    }

    pub fn terminal(&self) -> Option<Result<TerminalSummary, EngineError>> {
        self.of_kind(RecordKind::Terminal)
            .next()
            .map(TranscriptRecord::payload_as)
    }
}
