//! Fundraising resolution: success sampling, partial fills, settlement
//! delays and debt pricing.
//!
//! Each request draws exactly three uniforms from the
//! `(seed, Fundraising, 0, month)` stream, in order: success, fill, delay.
//! The fill and delay draws are consumed even on failure so a request's
//! outcome never depends on whether earlier months raised.

use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::ledger::EnterpriseState;
use crate::money::Money;
use crate::rng::{Domain, Stream};
use crate::scenario::{MacroSnapshot, RuleConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Instrument {
    Equity,
    Debt,
}

impl Instrument {
    pub fn as_str(self) -> &'static str {
        match self {
            Instrument::Equity => "equity",
            Instrument::Debt => "debt",
        }
    }
}

/// Leverage is irrelevant below this ratio.
pub const LEVERAGE_KNEE: f64 = 0.5;
/// Debt success multiplier slope above the knee; reaches zero at L = 7/6.
pub const DEBT_PENALTY_SLOPE: f64 = 1.5;
/// Rate spread per unit of leverage above the knee, in basis points.
pub const SPREAD_BPS_PER_UNIT: f64 = 500.0;
pub const EQUITY_ROUND_DECAY: f64 = 0.75;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FundraisingRequest {
    pub instrument: Instrument,
    pub amount_requested: Money,
    pub request_month: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendingSettlement {
    pub instrument: Instrument,
    pub amount_actual: Money,
    pub due_month: u32,
    pub origin_request_month: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateQuote {
    /// `(tsy2y + baa_oas) / 100`, in basis points.
    pub base_bps: i64,
    pub spread_bps: i64,
    pub rate_bps: i64,
}

impl RateQuote {
    pub fn annual_rate(&self) -> f64 {
        self.rate_bps as f64 / 10_000.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FundraisingOutcome {
    pub instrument: Instrument,
    pub amount_requested: Money,
    pub success: bool,
    pub p_macro: f64,
    pub m_company: f64,
    pub p_adj: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fill_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amount_actual: Option<Money>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settlement_month: Option<u32>,
    /// Debt only. Non-binding: the contract rate is fixed at settlement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indicative_rate: Option<RateQuote>,
}

/// `debt / equity`, infinite when book equity is not positive.
pub fn leverage_ratio(debt: Money, equity: Money) -> f64 {
    if equity <= Money::ZERO {
        f64::INFINITY
    } else {
        debt.cents() as f64 / equity.cents() as f64
    }
}

pub fn macro_probability(
    instrument: Instrument,
    macro_now: &MacroSnapshot,
    rules: &RuleConfig,
) -> f64 {
    let map = match instrument {
        Instrument::Equity => &rules.prob_maps.equity,
        Instrument::Debt => &rules.prob_maps.debt,
    };
    map.eval(map.driver.read(macro_now))
}

/// Equity: `0.75^n` after n successful rounds. Debt: linear penalty in
/// leverage above 0.5, floored at zero.
pub fn company_multiplier(instrument: Instrument, state: &EnterpriseState) -> f64 {
    match instrument {
        Instrument::Equity => EQUITY_ROUND_DECAY.powi(state.successful_equity_rounds as i32),
        Instrument::Debt => debt_multiplier(state.leverage()),
    }
}

pub fn debt_multiplier(leverage: f64) -> f64 {
    (1.0 - DEBT_PENALTY_SLOPE * (leverage - LEVERAGE_KNEE).max(0.0)).max(0.0)
}

/// Base lending rate plus 500 bps per unit of leverage above 0.5, rounded
/// to whole basis points. Infinite leverage must be capped by the caller.
pub fn contract_rate(macro_now: &MacroSnapshot, leverage: f64) -> RateQuote {
    let base = (macro_now.tsy2y + macro_now.baa_oas) * 100.0;
    let spread = SPREAD_BPS_PER_UNIT * (leverage - LEVERAGE_KNEE).max(0.0);
    RateQuote {
        base_bps: base.round() as i64,
        spread_bps: spread.round() as i64,
        rate_bps: (base + spread).round() as i64,
    }
}

pub fn indicative_rate(
    macro_now: &MacroSnapshot,
    state: &EnterpriseState,
    rules: &RuleConfig,
) -> RateQuote {
    contract_rate(
        macro_now,
        state.leverage().min(rules.debt_terms.leverage_cap),
    )
}

/// Samples the outcome of a request and, on success, queues its settlement.
/// An equity success counts toward the round decay immediately.
pub fn resolve_request(
    req: &FundraisingRequest,
    state: &mut EnterpriseState,
    macro_now: &MacroSnapshot,
    rules: &RuleConfig,
    seed: u64,
) -> Result<FundraisingOutcome, EngineError> {
    if req.amount_requested <= Money::ZERO {
        return Err(EngineError::NonPositiveAmount);
    }
    let p_macro = macro_probability(req.instrument, macro_now, rules);
    let m_company = company_multiplier(req.instrument, state);
    let p_adj = p_macro * m_company;

    let mut stream = Stream::new(seed, Domain::Fundraising, 0, req.request_month);
    let u_success = stream.next_f64();
    let u_fill = stream.next_f64();
    let [d_lo, d_hi] = rules.delay_range;
    let delay = stream.uniform_int(d_lo, d_hi);
    let [f_lo, f_hi] = rules.fill_range;
    let fill = f_lo + (f_hi - f_lo) * u_fill;

    let success = u_success < p_adj;
    let indicative = match req.instrument {
        Instrument::Debt => Some(indicative_rate(macro_now, state, rules)),
        Instrument::Equity => None,
    };
    let mut outcome = FundraisingOutcome {
        instrument: req.instrument,
        amount_requested: req.amount_requested,
        success,
        p_macro,
        m_company,
        p_adj,
        fill_rate: None,
        amount_actual: None,
        settlement_month: None,
        indicative_rate: indicative,
    };
    if success {
        let amount = req.amount_requested.scale(fill);
        let due = req.request_month + delay;
        outcome.fill_rate = Some(fill);
        outcome.amount_actual = Some(amount);
        outcome.settlement_month = Some(due);
        state.pending_settlements.push(PendingSettlement {
            instrument: req.instrument,
            amount_actual: amount,
            due_month: due,
            origin_request_month: req.request_month,
        });
        if req.instrument == Instrument::Equity {
            state.successful_equity_rounds += 1;
        }
    }
    Ok(outcome)
}
