//! The monthly episode loop.
//!
//! Month `t` runs in a fixed order: evolve indicators and post operations
//! (settlement arrivals first), check survival, show the observation, serve
//! tool calls and memory operations, resolve exactly one action, advance.
//! An episode that completes month `horizon - 1` alive has survived.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::evolve;
use crate::error::EngineError;
use crate::fundraising::{resolve_request, FundraisingOutcome, FundraisingRequest, Instrument};
use crate::ledger::{
    close_books, post_month_operations, ttm_revenue, BalanceSheet, CashFlowRow, EnterpriseState,
    IncomeRow,
};
use crate::memory::{MemoryOp, MemoryResult, Note, Notepad};
use crate::money::Money;
use crate::scenario::{Scenario, ScenarioCatalog, Valuation};
use crate::tools::{self, NoParams, ToolCall, ToolResult};
use crate::transcript::{
    ActionRecord, EnvFeedback, EpisodeStart, ErrorInfo, MemoryOpRecord, MonthlySnapshot,
    RecordKind, TerminalSummary, ToolCallRecord, Transcript,
};

pub const RECENT_NOTES_SHOWN: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub scenario_id: String,
    pub seed: u64,
    /// Shorter horizon than the scenario's, for tests and smoke runs.
    #[serde(default)]
    pub horizon: Option<u32>,
    #[serde(default)]
    pub agent_label: String,
}

impl EpisodeConfig {
    pub fn new(scenario_id: impl Into<String>, seed: u64) -> Self {
        EpisodeConfig {
            scenario_id: scenario_id.into(),
            seed,
            horizon: None,
            agent_label: String::new(),
        }
    }

    pub fn with_agent(mut self, label: impl Into<String>) -> Self {
        self.agent_label = label.into();
        self
    }

    pub fn with_horizon(mut self, horizon: u32) -> Self {
        self.horizon = Some(horizon);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaiseParams {
    pub instrument: Instrument,
    pub amount: Money,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case")]
pub enum Action {
    Pass(NoParams),
    BookClosing(NoParams),
    FundRaisingRequest(RaiseParams),
}

impl Action {
    pub fn pass() -> Action {
        Action::Pass(NoParams {})
    }

    pub fn book_closing() -> Action {
        Action::BookClosing(NoParams {})
    }

    pub fn raise(instrument: Instrument, amount: Money) -> Action {
        Action::FundRaisingRequest(RaiseParams { instrument, amount })
    }

    pub fn from_parts(name: &str, params: serde_json::Value) -> Result<Action, EngineError> {
        let params = if params.is_null() {
            serde_json::json!({})
        } else {
            params
        };
        serde_json::from_value(serde_json::json!({ "name": name, "params": params }))
            .map_err(|e| EngineError::InvalidRequest(format!("action '{name}': {e}")))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Action::Pass(_) => "pass",
            Action::BookClosing(_) => "book_closing",
            Action::FundRaisingRequest(_) => "fund_raising_request",
        }
    }
}

/// Statements produced by a book closing, limited to the months reconciled
/// by this close.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosingReport {
    pub as_of_month: u32,
    pub previous_close_month: Option<u32>,
    pub balance_sheet: BalanceSheet,
    pub income_statement: Vec<IncomeRow>,
    pub cash_flow: Vec<CashFlowRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ActionResolution {
    Pass,
    BookClosing(ClosingReport),
    FundRaisingRequest(FundraisingOutcome),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawSignals {
    pub active_borrowers: u64,
    pub unreconciled_events: usize,
    pub last_close_month: Option<u32>,
}

/// What the agent sees for free at the start of a month.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t: u32,
    pub month_label: String,
    pub horizon: u32,
    pub raw_signals: RawSignals,
    pub recent_notes: Vec<Note>,
    pub budget_remaining: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Next {
    Continue { observation: Observation },
    Terminated { terminal: TerminalSummary },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionOutcome {
    pub month: u32,
    pub resolution: ActionResolution,
    pub coerced: bool,
    pub next: Next,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TurnRequest {
    Tool { call: ToolCall },
    Memory { op: MemoryOp },
    Action { action: Action },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TurnResponse {
    Tool { result: ToolResult },
    Memory { result: MemoryResult },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonthResult {
    /// Responses to the non-action requests, in order.
    pub responses: Vec<Result<TurnResponse, EngineError>>,
    pub outcome: ActionOutcome,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    NotStarted,
    AwaitingAction,
    Terminated,
}

/// Per-episode aggregates used by the results table.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub survived: bool,
    pub months_lived: u32,
    pub score: Money,
    pub equity_raised: Money,
    pub debt_raised: Money,
    pub fr_attempts: u32,
    pub fr_successes: u32,
    pub peak_cash: Money,
    pub end_cash: Money,
    pub low_cash: Money,
    pub n_tools: u64,
    pub passes: u32,
    pub book_closings: u32,
}

impl EpisodeSummary {
    pub fn actions(&self) -> u32 {
        self.passes + self.book_closings + self.fr_attempts
    }
}

/// `Score = multiple * TTM revenue + cash - lambda * N_tools` for survivors,
/// zero otherwise.
pub fn terminal_score(
    survived: bool,
    ttm: Money,
    cash: Money,
    n_tools: u64,
    valuation: &Valuation,
) -> Money {
    if !survived {
        return Money::ZERO;
    }
    ttm.scale(valuation.multiple) + cash
        - Money::from_cents(valuation.tool_penalty.cents() * n_tools as i64)
}

#[derive(Clone, Debug)]
pub struct Episode {
    scenario: Arc<Scenario>,
    config: EpisodeConfig,
    horizon: u32,
    state: EnterpriseState,
    notepad: Notepad,
    budget_used: u32,
    phase: Phase,
    transcript: Transcript,
    terminal: Option<TerminalSummary>,
    summary: EpisodeSummary,
}

impl Episode {
    /// A fresh episode at month 0 with nothing posted yet.
    pub fn new(config: EpisodeConfig, scenario: Arc<Scenario>) -> Result<Episode, EngineError> {
        if config.scenario_id != scenario.id {
            return Err(EngineError::ScenarioNotFound(config.scenario_id));
        }
        let horizon = config.horizon.unwrap_or(scenario.horizon);
        if horizon == 0 || horizon > scenario.horizon {
            return Err(EngineError::InvalidRequest(format!(
                "horizon must lie in 1..={}, found {horizon}",
                scenario.horizon
            )));
        }
        let state = EnterpriseState::new(
            &scenario.initial_company,
            &scenario.rules,
            &scenario.macro_series[0],
        );
        let summary = EpisodeSummary {
            seed: config.seed,
            peak_cash: state.cash,
            low_cash: state.cash,
            end_cash: state.cash,
            ..EpisodeSummary::default()
        };
        Ok(Episode {
            scenario,
            config,
            horizon,
            state,
            notepad: Notepad::default(),
            budget_used: 0,
            phase: Phase::NotStarted,
            transcript: Transcript::default(),
            terminal: None,
            summary,
        })
    }

    pub fn from_catalog(
        config: EpisodeConfig,
        catalog: &ScenarioCatalog,
    ) -> Result<Episode, EngineError> {
        let scenario = catalog
            .get(&config.scenario_id)
            .ok_or_else(|| EngineError::ScenarioNotFound(config.scenario_id.clone()))?;
        Episode::new(config, scenario)
    }

    /// Posts month 0 and returns the first observation, or the terminal
    /// summary if the company is insolvent from the outset.
    pub fn start(&mut self) -> Result<Next, EngineError> {
        if self.phase != Phase::NotStarted {
            return Err(EngineError::ContractViolation(
                "episode already started".into(),
            ));
        }
        let start = EpisodeStart {
            scenario_id: self.scenario.id.clone(),
            seed: self.config.seed,
            horizon: self.horizon,
            agent_label: self.config.agent_label.clone(),
            initial_cash: self.state.cash,
            initial_borrowers: self.state.active_borrowers,
            shares_outstanding: self.state.cap_table.shares_outstanding,
        };
        self.transcript.push(0, RecordKind::EpisodeStart, &start);
        self.open_month(0)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn state(&self) -> &EnterpriseState {
        &self.state
    }

    pub fn month(&self) -> u32 {
        self.state.month
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn is_over(&self) -> bool {
        self.phase == Phase::Terminated
    }

    pub fn terminal(&self) -> Option<&TerminalSummary> {
        self.terminal.as_ref()
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn notepad(&self) -> &Notepad {
        &self.notepad
    }

    /// Aggregates maintained live while the episode runs.
    pub fn summary(&self) -> &EpisodeSummary {
        &self.summary
    }

    pub fn tool_budget(&self) -> u32 {
        self.scenario.rules.tool_budget
    }

    pub fn budget_remaining(&self) -> u32 {
        self.tool_budget().saturating_sub(self.budget_used)
    }

    pub fn month_label(&self) -> String {
        self.scenario.label(self.state.month).unwrap_or_default()
    }

    pub fn observation(&self) -> Observation {
        Observation {
            t: self.state.month,
            month_label: self.month_label(),
            horizon: self.horizon,
            raw_signals: RawSignals {
                active_borrowers: self.state.active_borrowers,
                unreconciled_events: self.state.unreconciled_events(),
                last_close_month: self.state.last_close_month,
            },
            recent_notes: self.notepad.recent(RECENT_NOTES_SHOWN),
            budget_remaining: self.budget_remaining(),
        }
    }

    fn require_open(&self) -> Result<(), EngineError> {
        match self.phase {
            Phase::NotStarted => Err(EngineError::NotStarted),
            Phase::Terminated => Err(EngineError::EpisodeOver),
            Phase::AwaitingAction => Ok(()),
        }
    }

    /// Rejects a request addressed to a month other than the current one.
    /// A stale action means this month's action was already taken.
    pub fn expect_month(&self, month: u32, is_action: bool) -> Result<(), EngineError> {
        self.require_open()?;
        let t = self.state.month;
        match (month.cmp(&t), is_action) {
            (std::cmp::Ordering::Equal, _) => Ok(()),
            (std::cmp::Ordering::Less, true) => Err(EngineError::SecondAction),
            (std::cmp::Ordering::Less, false) => Err(EngineError::ContractViolation(format!(
                "tool call for month {month} after that month's action; current month is {t}"
            ))),
            (std::cmp::Ordering::Greater, _) => Err(EngineError::ContractViolation(format!(
                "month {month} has not started; current month is {t}"
            ))),
        }
    }

    /// Runs one budgeted tool. Rejected calls are recorded but do not count
    /// toward `N_tools` or the monthly budget.
    pub fn call_tool(&mut self, call: ToolCall) -> Result<ToolResult, EngineError> {
        self.require_open()?;
        let t = self.state.month;
        let result = if self.budget_used >= self.tool_budget() {
            Err(EngineError::BudgetExhausted {
                limit: self.tool_budget(),
            })
        } else {
            tools::execute(&call, &self.state, &self.scenario)
        };
        if result.is_ok() {
            self.budget_used += 1;
            self.state.tool_calls_total += 1;
            self.summary.n_tools = self.state.tool_calls_total;
        }
        let record = ToolCallRecord {
            request: call,
            result: result.as_ref().ok().cloned(),
            error: result.as_ref().err().map(ErrorInfo::from),
            budget_remaining: self.budget_remaining(),
        };
        self.transcript.push(t, RecordKind::ToolCall, &record);
        result
    }

    /// Notepad access; free and always available while the episode runs.
    pub fn memory(&mut self, op: MemoryOp) -> Result<MemoryResult, EngineError> {
        self.require_open()?;
        let t = self.state.month;
        let result = self.notepad.apply(t, &op);
        self.transcript.push(
            t,
            RecordKind::MemoryOp,
            &MemoryOpRecord {
                request: op,
                result: result.clone(),
            },
        );
        Ok(result)
    }

    /// Takes this month's action and advances to the next month.
    pub fn act(&mut self, action: Action) -> Result<ActionOutcome, EngineError> {
        self.act_inner(action, false)
    }

    pub(crate) fn act_inner(
        &mut self,
        action: Action,
        coerced: bool,
    ) -> Result<ActionOutcome, EngineError> {
        self.require_open()?;
        let t = self.state.month;
        let resolution = match &action {
            Action::Pass(_) => ActionResolution::Pass,
            Action::BookClosing(_) => {
                let previous = self.state.last_close_month;
                let fs = close_books(&mut self.state)?;
                let fresh = |m: u32| previous.is_none_or(|p| m > p);
                ActionResolution::BookClosing(ClosingReport {
                    as_of_month: fs.as_of_month,
                    previous_close_month: previous,
                    balance_sheet: fs.balance_sheet,
                    income_statement: fs
                        .income_statement
                        .into_iter()
                        .filter(|r| fresh(r.month))
                        .collect(),
                    cash_flow: fs
                        .cash_flow
                        .into_iter()
                        .filter(|r| fresh(r.month))
                        .collect(),
                })
            }
            Action::FundRaisingRequest(p) => {
                let req = FundraisingRequest {
                    instrument: p.instrument,
                    amount_requested: p.amount,
                    request_month: t,
                };
                let macro_now = &self.scenario.macro_series[t as usize];
                let outcome = resolve_request(
                    &req,
                    &mut self.state,
                    macro_now,
                    &self.scenario.rules,
                    self.config.seed,
                )?;
                ActionResolution::FundRaisingRequest(outcome)
            }
        };
        match &resolution {
            ActionResolution::Pass => self.summary.passes += 1,
            ActionResolution::BookClosing(_) => self.summary.book_closings += 1,
            ActionResolution::FundRaisingRequest(o) => {
                self.summary.fr_attempts += 1;
                if o.success {
                    self.summary.fr_successes += 1;
                }
            }
        }
        let record = ActionRecord {
            request: action,
            coerced,
            resolution: resolution.clone(),
        };
        self.transcript.push(t, RecordKind::Action, &record);

        let next = if t + 1 >= self.horizon {
            Next::Terminated {
                terminal: self.terminate(true, self.horizon),
            }
        } else {
            self.open_month(t + 1)?
        };
        Ok(ActionOutcome {
            month: t,
            resolution,
            coerced,
            next,
        })
    }

    /// Plays a whole month from a scripted turn: tool and memory requests
    /// followed by at most one action. A turn without an action is played
    /// as a logged pass.
    pub fn step_month(&mut self, turn: Vec<TurnRequest>) -> Result<MonthResult, EngineError> {
        self.require_open()?;
        let actions = turn
            .iter()
            .filter(|r| matches!(r, TurnRequest::Action { .. }))
            .count();
        if actions > 1 {
            return Err(EngineError::SecondAction);
        }
        if actions == 1 && !matches!(turn.last(), Some(TurnRequest::Action { .. })) {
            return Err(EngineError::ContractViolation(
                "request after this month's action".into(),
            ));
        }
        let mut responses = Vec::new();
        let mut action = None;
        for request in turn {
            match request {
                TurnRequest::Tool { call } => responses.push(
                    self.call_tool(call)
                        .map(|result| TurnResponse::Tool { result }),
                ),
                TurnRequest::Memory { op } => responses.push(
                    self.memory(op)
                        .map(|result| TurnResponse::Memory { result }),
                ),
                TurnRequest::Action { action: a } => action = Some(a),
            }
        }
        let outcome = match action {
            Some(a) => self.act(a)?,
            None => self.act_inner(Action::pass(), true)?,
        };
        Ok(MonthResult { responses, outcome })
    }

    fn open_month(&mut self, t: u32) -> Result<Next, EngineError> {
        let scenario = Arc::clone(&self.scenario);
        let (macro_now, industry) = scenario.external_at(t)?;
        self.state.month = t;
        self.budget_used = 0;
        let indicators = if t == 0 {
            self.state.indicators
        } else {
            let rules = &scenario.rules;
            evolve(
                &self.state.indicators,
                industry,
                &rules.noise_specs,
                &rules.coupling,
                scenario.initial_company.initial_indicators.collection_rate,
                self.config.seed,
                t,
            )
        };
        let posting =
            post_month_operations(&mut self.state, &indicators, macro_now, &scenario.rules)?;

        for s in &posting.settlements {
            match s.instrument {
                Instrument::Equity => self.summary.equity_raised += s.amount,
                Instrument::Debt => self.summary.debt_raised += s.amount,
            }
        }
        let cash = self.state.cash;
        self.summary.peak_cash = self.summary.peak_cash.max(cash);
        self.summary.low_cash = self.summary.low_cash.min(cash);
        self.summary.end_cash = cash;

        let snapshot = MonthlySnapshot {
            month_label: self.month_label(),
            cash,
            active_borrowers: self.state.active_borrowers,
            receivables: self.state.receivables_total(),
            debt: self.state.debt_outstanding(),
            revenue: posting.revenue,
            indicators,
            n_tools: self.state.tool_calls_total,
            alive: self.state.alive,
        };
        self.transcript
            .push(t, RecordKind::MonthlySnapshot, &snapshot);
        if !posting.settlements.is_empty() {
            self.transcript.push(
                t,
                RecordKind::EnvFeedback,
                &EnvFeedback {
                    settlements: posting.settlements,
                },
            );
        }

        if !self.state.alive {
            return Ok(Next::Terminated {
                terminal: self.terminate(false, t),
            });
        }
        self.phase = Phase::AwaitingAction;
        let observation = self.observation();
        self.transcript
            .push(t, RecordKind::Observation, &observation);
        Ok(Next::Continue { observation })
    }

    fn terminate(&mut self, survived: bool, months_lived: u32) -> TerminalSummary {
        let rules = &self.scenario.rules;
        let ttm = ttm_revenue(&self.state);
        let n_tools = self.state.tool_calls_total;
        let score = terminal_score(survived, ttm, self.state.cash, n_tools, &rules.valuation);
        let (valuation, tool_penalty) = if survived {
            (
                ttm.scale(rules.valuation.multiple),
                Money::from_cents(rules.valuation.tool_penalty.cents() * n_tools as i64),
            )
        } else {
            (Money::ZERO, Money::ZERO)
        };
        let terminal = TerminalSummary {
            survived,
            months_lived,
            score,
            ttm_revenue: ttm,
            final_cash: self.state.cash,
            n_tools,
            valuation,
            tool_penalty,
        };
        self.phase = Phase::Terminated;
        self.summary.survived = survived;
        self.summary.months_lived = months_lived;
        self.summary.score = score;
        self.transcript
            .push(self.state.month, RecordKind::Terminal, &terminal);
        self.terminal = Some(terminal.clone());
        terminal
    }
}

/// Re-executes a transcript's recorded decisions under its recorded seed
/// and checks that every record comes out byte-for-byte identical.
pub fn replay(transcript_jsonl: &str, scenario: Arc<Scenario>) -> Result<Transcript, EngineError> {
    let recorded = Transcript::from_jsonl(transcript_jsonl)?;
    let start = recorded.start()?;
    if start.scenario_id != scenario.id {
        return Err(EngineError::ReplayMismatch(format!(
            "transcript was recorded on scenario '{}', replaying on '{}'",
            start.scenario_id, scenario.id
        )));
    }
    let config = EpisodeConfig {
        scenario_id: start.scenario_id.clone(),
        seed: start.seed,
        horizon: Some(start.horizon),
        agent_label: start.agent_label.clone(),
    };
    let mut episode = Episode::new(config, scenario)?;
    episode.start()?;
    for record in recorded.records() {
        match record.kind {
            RecordKind::ToolCall => {
                let r: ToolCallRecord = record.payload_as()?;
                let _ = episode.call_tool(r.request);
            }
            RecordKind::MemoryOp => {
                let r: MemoryOpRecord = record.payload_as()?;
                episode.memory(r.request)?;
            }
            RecordKind::Action => {
                let r: ActionRecord = record.payload_as()?;
                episode.act_inner(r.request, r.coerced)?;
            }
            _ => {}
        }
    }
    let replayed = episode.transcript.to_jsonl();
    let original = recorded.to_jsonl();
    if replayed != original {
        let line = replayed
            .lines()
            .zip(original.lines())
            .position(|(a, b)| a != b)
            .unwrap_or_else(|| replayed.lines().count().min(original.lines().count()));
        return Err(EngineError::ReplayMismatch(format!(
            "first difference at record {}",
            line + 1
        )));
    }
    if transcript_jsonl.trim_end() != original.trim_end() {
        return Err(EngineError::ReplayMismatch(
            "transcript is not in canonical form".into(),
        ));
    }
    Ok(episode.transcript)
}
