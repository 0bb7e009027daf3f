//! The four budgeted observation tools.
//!
//! Handlers are pure reads of episode state; budget accounting lives in the
//! engine. Nothing here looks past the current month: market history stops
//! at `t`, and statement aggregates stop at the last close.

use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::ledger::{EnterpriseState, FinancialStatements};
use crate::money::Money;
use crate::scenario::{BoardMaterials, IndustrySnapshot, MacroSnapshot, Scenario, VendorContract};

pub const DEFAULT_TOOL_BUDGET: u32 = 20;
pub const MAX_PROJECTION_MONTHS: u32 = 24;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoParams {}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonthRange {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from_month: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to_month: Option<u32>,
}

impl MonthRange {
    /// Resolves against the current month; defaults to `0..=t`.
    fn resolve(&self, t: u32) -> Result<(u32, u32), EngineError> {
        let from = self.from_month.unwrap_or(0);
        let to = self.to_month.unwrap_or(t);
        if to > t {
            return Err(EngineError::InvalidRequest(format!(
                "to_month {to} is after the current month {t}"
            )));
        }
        if from > to {
            return Err(EngineError::InvalidRequest(format!(
                "from_month {from} is after to_month {to}"
            )));
        }
        Ok((from, to))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedInflow {
    /// Months ahead of now, `1..=horizon_months`.
    pub month: u32,
    pub amount: Money,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionAssumptions {
    pub horizon_months: i64,
    /// Percent per month, applied to `monthly_revenue`.
    #[serde(default)]
    pub monthly_revenue_growth: f64,
    pub monthly_burn: Money,
    /// Cash revenue in the first projected month before growth.
    #[serde(default)]
    pub monthly_revenue: Money,
    #[serde(default)]
    pub expected_inflows: Vec<ExpectedInflow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case")]
pub enum ToolCall {
    VerifyCashPosition(NoParams),
    ReviewFinancialRecords(MonthRange),
    AnalyzeMarketConditions(MonthRange),
    ConductCashflowProjection(ProjectionAssumptions),
}

impl ToolCall {
    /// Parses a `(name, params)` pair; `params` may be `null` for tools
    /// without required parameters.
    pub fn from_parts(name: &str, params: serde_json::Value) -> Result<ToolCall, EngineError> {
        let params = if params.is_null() {
            serde_json::json!({})
        } else {
            params
        };
        serde_json::from_value(serde_json::json!({ "name": name, "params": params }))
            .map_err(|e| EngineError::InvalidRequest(format!("tool '{name}': {e}")))
    }

    pub fn name(&self) -> &'static str {
        match self {
            ToolCall::VerifyCashPosition(_) => "verify_cash_position",
            ToolCall::ReviewFinancialRecords(_) => "review_financial_records",
            ToolCall::AnalyzeMarketConditions(_) => "analyze_market_conditions",
            ToolCall::ConductCashflowProjection(_) => "conduct_cashflow_projection",
        }
    }

    pub fn verify_cash() -> ToolCall {
        ToolCall::VerifyCashPosition(NoParams {})
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CashPosition {
    pub cash: Money,
}

/// A ledger event as it appears before reconciliation: when, how much, and
/// a free-text memo, without the classification used by the statements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawEvent {
    pub month: u32,
    pub ledger: String,
    pub amount: Money,
    pub memo: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordsView {
    pub last_close_month: Option<u32>,
    /// Statements as of the last close, restricted to the requested range.
    pub statements: Option<FinancialStatements>,
    /// Events posted after the last close within the requested range.
    pub raw_events: Vec<RawEvent>,
    pub board_materials: BoardMaterials,
    pub vendor_contracts: Vec<VendorContract>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketRow {
    pub month: u32,
    pub label: String,
    #[serde(rename = "macro")]
    pub macro_snapshot: MacroSnapshot,
    pub industry: IndustrySnapshot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketView {
    pub rows: Vec<MarketRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRow {
    pub month: u32,
    pub revenue: Money,
    pub burn: Money,
    pub inflow: Money,
    pub closing_cash: Money,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub starting_cash: Money,
    pub rows: Vec<ProjectionRow>,
    /// First projected month whose closing cash is at or below zero.
    pub zero_crossing_month: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tool", rename_all = "snake_case")]
pub enum ToolResult {
    VerifyCashPosition(CashPosition),
    ReviewFinancialRecords(RecordsView),
    AnalyzeMarketConditions(MarketView),
    ConductCashflowProjection(Projection),
}

/// Validates a call against the current state without running it.
pub fn validate(call: &ToolCall, state: &EnterpriseState) -> Result<(), EngineError> {
    match call {
        ToolCall::VerifyCashPosition(_) => Ok(()),
        ToolCall::ReviewFinancialRecords(r) | ToolCall::AnalyzeMarketConditions(r) => {
            r.resolve(state.month).map(|_| ())
        }
        ToolCall::ConductCashflowProjection(a) => validate_assumptions(a),
    }
}

pub fn execute(
    call: &ToolCall,
    state: &EnterpriseState,
    scenario: &Scenario,
) -> Result<ToolResult, EngineError> {
    validate(call, state)?;
    Ok(match call {
        ToolCall::VerifyCashPosition(_) => {
            ToolResult::VerifyCashPosition(verify_cash_position(state))
        }
        ToolCall::ReviewFinancialRecords(r) => {
            ToolResult::ReviewFinancialRecords(review_financial_records(state, scenario, r)?)
        }
        ToolCall::AnalyzeMarketConditions(r) => {
            ToolResult::AnalyzeMarketConditions(analyze_market_conditions(state, scenario, r)?)
        }
        ToolCall::ConductCashflowProjection(a) => {
            ToolResult::ConductCashflowProjection(conduct_cashflow_projection(state, a)?)
        }
    })
}

pub fn verify_cash_position(state: &EnterpriseState) -> CashPosition {
    CashPosition { cash: state.cash }
}

pub fn review_financial_records(
    state: &EnterpriseState,
    scenario: &Scenario,
    range: &MonthRange,
) -> Result<RecordsView, EngineError> {
    let (from, to) = range.resolve(state.month)?;
    let in_range = |m: u32| m >= from && m <= to;
    let statements = state.last_statements.as_ref().map(|fs| {
        let mut fs = fs.clone();
        fs.income_statement.retain(|r| in_range(r.month));
        fs.cash_flow.retain(|r| in_range(r.month));
        fs
    });
    let after_close = |m: u32| state.last_close_month.is_none_or(|c| m > c);
    let mut raw_events: Vec<RawEvent> = Vec::new();
    for (ledger, entries) in [
        ("accrual", &state.accrual_ledger),
        ("cash", &state.cash_ledger),
    ] {
        raw_events.extend(
            entries
                .iter()
                .filter(|e| after_close(e.month) && in_range(e.month))
                .map(|e| RawEvent {
                    month: e.month,
                    ledger: ledger.to_string(),
                    amount: e.amount,
                    memo: e.memo.clone(),
                }),
        );
    }
    raw_events.sort_by_key(|e| e.month);
    Ok(RecordsView {
        last_close_month: state.last_close_month,
        statements,
        raw_events,
        board_materials: scenario.initial_company.board_materials.clone(),
        vendor_contracts: scenario.initial_company.vendor_contracts.clone(),
    })
}

pub fn analyze_market_conditions(
    state: &EnterpriseState,
    scenario: &Scenario,
    range: &MonthRange,
) -> Result<MarketView, EngineError> {
    let (from, to) = range.resolve(state.month)?;
    let mut rows = Vec::with_capacity((to - from + 1) as usize);
    for m in from..=to {
        let (macro_snapshot, industry) = scenario.external_at(m)?;
        rows.push(MarketRow {
            month: m,
            label: scenario.label(m)?,
            macro_snapshot: *macro_snapshot,
            industry: *industry,
        });
    }
    Ok(MarketView { rows })
}

fn validate_assumptions(a: &ProjectionAssumptions) -> Result<(), EngineError> {
    if a.horizon_months < 1 || a.horizon_months > i64::from(MAX_PROJECTION_MONTHS) {
        return Err(EngineError::BadAssumptions(format!(
            "horizon_months must lie in 1..={MAX_PROJECTION_MONTHS}, found {}",
            a.horizon_months
        )));
    }
    if !a.monthly_revenue_growth.is_finite() || a.monthly_revenue_growth <= -100.0 {
        return Err(EngineError::BadAssumptions(
            "monthly_revenue_growth must be finite and above -100".into(),
        ));
    }
    for inflow in &a.expected_inflows {
        if inflow.month < 1 || i64::from(inflow.month) > a.horizon_months {
            return Err(EngineError::BadAssumptions(format!(
                "inflow month {} outside 1..={}",
                inflow.month, a.horizon_months
            )));
        }
    }
    Ok(())
}

/// Straight-line projection from true current cash. Month k closes at
/// `close(k-1) + revenue * (1 + g)^(k-1) - burn + inflows(k)`.
pub fn conduct_cashflow_projection(
    state: &EnterpriseState,
    a: &ProjectionAssumptions,
) -> Result<Projection, EngineError> {
    validate_assumptions(a)?;
    let growth = 1.0 + a.monthly_revenue_growth / 100.0;
    let mut cash = state.cash;
    let mut rows = Vec::with_capacity(a.horizon_months as usize);
    let mut zero_crossing_month = None;
    for k in 1..=a.horizon_months as u32 {
        let revenue = a.monthly_revenue.scale(growth.powi(k as i32 - 1));
        let inflow: Money = a
            .expected_inflows
            .iter()
            .filter(|i| i.month == k)
            .map(|i| i.amount)
            .sum();
        cash = cash + revenue - a.monthly_burn + inflow;
        if zero_crossing_month.is_none() && cash <= Money::ZERO {
            zero_crossing_month = Some(k);
        }
        rows.push(ProjectionRow {
            month: k,
            revenue,
            burn: a.monthly_burn,
            inflow,
            closing_cash: cash,
        });
    }
    Ok(Projection {
        starting_cash: state.cash,
        rows,
        zero_crossing_month,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state() -> EnterpriseState {
        let s = Scenario::default_scenario();
        EnterpriseState::new(&s.initial_company, &s.rules, &s.macro_series[0])
    }

    fn assumptions(horizon: i64) -> ProjectionAssumptions {
        ProjectionAssumptions {
            horizon_months: horizon,
            monthly_revenue_growth: 0.0,
            monthly_burn: Money::from_units(1_000_000),
            monthly_revenue: Money::ZERO,
            expected_inflows: vec![],
        }
    }

    #[test]
    fn projection_crosses_zero_at_fifteen() {
        let p = conduct_cashflow_projection(&state(), &assumptions(15)).unwrap();
        assert_eq!(p.zero_crossing_month, Some(15));
        assert_eq!(p.rows[14].closing_cash, Money::ZERO);
    }

    #[test]
    fn projection_inflow_lands_in_its_month() {
        let mut a = assumptions(6);
        a.expected_inflows.push(ExpectedInflow {
            month: 3,
            amount: Money::from_units(5_000_000),
        });
        let p = conduct_cashflow_projection(&state(), &a).unwrap();
        assert_eq!(
            p.rows[2].closing_cash,
            Money::from_units(15_000_000 - 3_000_000 + 5_000_000)
        );
    }

    #[test]
    fn bad_horizons_rejected() {
        for h in [0, -3, 25] {
            assert!(matches!(
                conduct_cashflow_projection(&state(), &assumptions(h)),
                Err(EngineError::BadAssumptions(_))
            ));
        }
        let mut a = assumptions(5);
        a.monthly_revenue_growth = f64::NAN;
        assert!(matches!(
            conduct_cashflow_projection(&state(), &a),
            Err(EngineError::BadAssumptions(_))
        ));
    }

    #[test]
    fn tool_call_wire_format() {
        let call = ToolCall::from_parts("verify_cash_position", serde_json::Value::Null).unwrap();
        assert_eq!(call, ToolCall::verify_cash());
        assert_eq!(
            serde_json::to_string(&call).unwrap(),
            r#"{"name":"verify_cash_position","params":{}}"#
        );
        let call = ToolCall::from_parts(
            "analyze_market_conditions",
            serde_json::json!({"from_month": 0}),
        )
        .unwrap();
        assert_eq!(
            call,
            ToolCall::AnalyzeMarketConditions(MonthRange {
                from_month: Some(0),
                to_month: None
            })
        );
        assert!(ToolCall::from_parts("peek_future", serde_json::json!({})).is_err());
        assert!(ToolCall::from_parts("verify_cash_position", serde_json::json!({"x": 1})).is_err());
    }

    #[test]
    fn market_view_stops_at_current_month() {
        let s = Scenario::default_scenario();
        let mut st = state();
        st.month = 4;
        let v = analyze_market_conditions(&st, &s, &MonthRange::default()).unwrap();
        assert_eq!(v.rows.len(), 5);
        assert_eq!(v.rows[0].label, "Jan 2xx0");
        let ahead = MonthRange {
            from_month: None,
            to_month: Some(5),
        };
        assert!(analyze_market_conditions(&st, &s, &ahead).is_err());
    }

    #[test]
    fn never_closed_shows_raw_events_only() {
        let s = Scenario::default_scenario();
        let v = review_financial_records(&state(), &s, &MonthRange::default()).unwrap();
        assert!(v.statements.is_none());
        assert!(v.last_close_month.is_none());
    }
}
