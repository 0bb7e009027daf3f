//! Scripted baseline policies.

use arena_core::engine::{Episode, Observation};
use arena_core::fundraising::Instrument;
use arena_core::rng::{Domain, Stream};
use arena_core::tools::{MonthRange, ToolResult};
use arena_core::{Action, ActionResolution, EngineError, MemoryOp, Money, ToolCall};
use serde::{Deserialize, Serialize};

/// The agent's side of one month: read the observation, spend tool budget,
/// use the notepad. The action is the return value of
/// [`Policy::play_month`].
pub struct Turn<'a> {
    episode: &'a mut Episode,
}

impl<'a> Turn<'a> {
    pub fn new(episode: &'a mut Episode) -> Self {
        Turn { episode }
    }

    pub fn observation(&self) -> Observation {
        self.episode.observation()
    }

    pub fn month(&self) -> u32 {
        self.episode.month()
    }

    pub fn call_tool(&mut self, call: ToolCall) -> Result<ToolResult, EngineError> {
        self.episode.call_tool(call)
    }

    pub fn memory(
        &mut self,
        op: MemoryOp,
    ) -> Result<arena_core::memory::MemoryResult, EngineError> {
        self.episode.memory(op)
    }
}

pub trait Policy: Send {
    fn play_month(&mut self, turn: &mut Turn<'_>) -> Action;

    /// Sees the resolution of the action it just chose.
    fn observe_resolution(&mut self, _month: u32, _resolution: &ActionResolution) {}
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    PassOnly,
    Random,
    Steward(StewardParams),
}

impl PolicySpec {
    pub fn parse(name: &str) -> Option<PolicySpec> {
        match name {
            "pass_only" | "pass-only" | "pass" => Some(PolicySpec::PassOnly),
            "random" => Some(PolicySpec::Random),
            "steward" => Some(PolicySpec::Steward(StewardParams::default())),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PolicySpec::PassOnly => "pass_only",
            PolicySpec::Random => "random",
            PolicySpec::Steward(_) => "steward",
        }
    }

    pub fn build(&self, seed: u64) -> Box<dyn Policy> {
        match self {
            PolicySpec::PassOnly => Box::new(PassOnly),
            PolicySpec::Random => Box::new(RandomPolicy { seed }),
            PolicySpec::Steward(p) => Box::new(Steward::new(p.clone())),
        }
    }
}

pub struct PassOnly;

impl Policy for PassOnly {
    fn play_month(&mut self, _turn: &mut Turn<'_>) -> Action {
        Action::pass()
    }
}

/// Uniform over the three action kinds, with an occasional cash check.
/// Draws come from the policy stream, so runs are reproducible per seed.
pub struct RandomPolicy {
    seed: u64,
}

impl Policy for RandomPolicy {
    fn play_month(&mut self, turn: &mut Turn<'_>) -> Action {
        let mut rng = Stream::new(self.seed, Domain::Policy, 0, turn.month());
        for _ in 0..rng.uniform_int(0, 2) {
            let _ = turn.call_tool(ToolCall::verify_cash());
        }
        match rng.uniform_int(0, 2) {
            0 => Action::pass(),
            1 => Action::book_closing(),
            _ => {
                let instrument = if rng.next_f64() < 0.5 {
                    Instrument::Equity
                } else {
                    Instrument::Debt
                };
                let units = 1_000_000 + i64::from(rng.uniform_int(0, 9_000)) * 1_000;
                Action::raise(instrument, Money::from_units(units))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StewardParams {
    pub close_cadence_months: u32,
    pub cash_floor: Money,
    pub runway_floor_months: f64,
    pub raise_multiple_of_burn: f64,
    pub vix_equity_threshold: f64,
    pub amount_bounds: [Money; 2],
    /// Debt is only requested while book leverage after the loan stays at
    /// or below this ratio.
    pub max_leverage: f64,
    /// Contract term of new debt, used to plan for bullet repayments.
    pub debt_term_months: u32,
}

impl Default for StewardParams {
    fn default() -> Self {
        StewardParams {
            close_cadence_months: 1,
            cash_floor: Money::from_units(10_000_000),
            runway_floor_months: 24.0,
            raise_multiple_of_burn: 24.0,
            vix_equity_threshold: 22.0,
            amount_bounds: [Money::from_units(8_000_000), Money::from_units(25_000_000)],
            max_leverage: 0.5,
            debt_term_months: 60,
        }
    }
}

/// Verifies cash every month, closes the books on cadence, and raises
/// ahead of need: when cash net of upcoming debt repayments, or runway,
/// drops below its floor and no earlier raise is still settling. Prefers
/// equity in calm markets and debt otherwise, as long as the debt keeps
/// leverage (from its latest close) within bounds.
pub struct Steward {
    params: StewardParams,
    last_cash: Option<Money>,
    burn: Option<Money>,
    /// Successful raises not yet received: `(settlement_month, instrument, amount)`.
    pending: Vec<(u32, Instrument, Money)>,
    /// Known debt principal by maturity month.
    maturities: Vec<(u32, Money)>,
    /// `(debt, equity)` from the latest book closing.
    book: Option<(Money, Money)>,
}

impl Steward {
    pub fn new(params: StewardParams) -> Self {
        Steward {
            params,
            last_cash: None,
            burn: None,
            pending: Vec::new(),
            maturities: Vec::new(),
            book: None,
        }
    }

    fn update_burn(&mut self, month: u32, cash: Money) {
        let mut arrived = Money::ZERO;
        let mut repaid = Money::ZERO;
        for (m, instrument, amount) in &self.pending {
            if *m == month {
                arrived += *amount;
                if *instrument == Instrument::Debt {
                    self.maturities
                        .push((month + self.params.debt_term_months, *amount));
                }
            }
        }
        self.pending.retain(|(m, _, _)| *m > month);
        for (m, amount) in &self.maturities {
            if *m == month {
                repaid += *amount;
            }
        }
        self.maturities.retain(|(m, _)| *m > month);
        if let Some(prev) = self.last_cash {
            let observed = prev - (cash - arrived + repaid);
            self.burn = Some(match self.burn {
                // Three-month exponential smoothing.
                Some(b) => (b.scale(2.0) + observed).scale(1.0 / 3.0),
                None => observed,
            });
        }
        self.last_cash = Some(cash);
    }

    fn current_vix(turn: &mut Turn<'_>) -> Option<f64> {
        let t = turn.month();
        let range = MonthRange {
            from_month: Some(t),
            to_month: Some(t),
        };
        match turn.call_tool(ToolCall::AnalyzeMarketConditions(range)) {
            Ok(ToolResult::AnalyzeMarketConditions(view)) => {
                view.rows.last().map(|r| r.macro_snapshot.vix)
            }
            _ => None,
        }
    }

    /// Largest debt amount keeping `(debt + a) / equity` within the cap.
    fn debt_headroom(&self) -> Money {
        match self.book {
            Some((debt, equity)) if equity > Money::ZERO => {
                (equity.scale(self.params.max_leverage) - debt).max(Money::ZERO)
            }
            _ => Money::ZERO,
        }
    }
}

impl Policy for Steward {
    fn play_month(&mut self, turn: &mut Turn<'_>) -> Action {
        let t = turn.month();
        let cash = match turn.call_tool(ToolCall::verify_cash()) {
            Ok(ToolResult::VerifyCashPosition(p)) => p.cash,
            _ => return Action::pass(),
        };
        self.update_burn(t, cash);
        let burn = self.burn.unwrap_or(Money::ZERO).max(Money::ZERO);
        let horizon = t + self.params.runway_floor_months.ceil() as u32;
        let due: Money = self
            .maturities
            .iter()
            .filter(|(m, _)| *m <= horizon)
            .map(|(_, a)| *a)
            .sum();
        let free_cash = cash - due;
        let short_runway = burn > Money::ZERO
            && (free_cash.cents() as f64) < self.params.runway_floor_months * burn.cents() as f64;
        if self.pending.is_empty() && (free_cash < self.params.cash_floor || short_runway) {
            let [lo, hi] = self.params.amount_bounds;
            let amount = (burn.scale(self.params.raise_multiple_of_burn) + due).clamp(lo, hi);
            let calm =
                Self::current_vix(turn).is_some_and(|vix| vix < self.params.vix_equity_threshold);
            let headroom = self.debt_headroom();
            if !calm && headroom >= lo {
                return Action::raise(Instrument::Debt, amount.min(headroom));
            }
            return Action::raise(Instrument::Equity, amount);
        }
        if self.params.close_cadence_months > 0 && t.is_multiple_of(self.params.close_cadence_months) {
            Action::book_closing()
        } else {
            Action::pass()
        }
    }

    fn observe_resolution(&mut self, _month: u32, resolution: &ActionResolution) {
        match resolution {
            ActionResolution::FundRaisingRequest(o) => {
                if let (Some(m), Some(a)) = (o.settlement_month, o.amount_actual) {
                    self.pending.push((m, o.instrument, a));
                }
            }
            ActionResolution::BookClosing(report) => {
                self.book = Some((report.balance_sheet.debt, report.balance_sheet.equity));
            }
            ActionResolution::Pass => {}
        }
    }
}
