//! Dual accrual/cash ledgers and the financial statements derived from them.
//!
//! Sign convention: inflows are positive, outflows negative. Expenses paid in
//! the month they are incurred appear in both ledgers. Revenue is accrued to
//! receivables and collected `receivable_lag` months later; whatever the
//! collection rate leaves behind is written off immediately.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dynamics::OperationalIndicators;
use crate::error::EngineError;
use crate::fundraising::{contract_rate, leverage_ratio, Instrument, PendingSettlement};
use crate::money::Money;
use crate::scenario::{CompanyConfig, MacroSnapshot, RuleConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    RevenueAccrual,
    CashCollection,
    Cogs,
    Opex,
    Interest,
    PrincipalRepayment,
    FundingInflow,
    ReceivableWriteoff,
}

impl EntryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntryKind::RevenueAccrual => "revenue_accrual",
            EntryKind::CashCollection => "cash_collection",
            EntryKind::Cogs => "cogs",
            EntryKind::Opex => "opex",
            EntryKind::Interest => "interest",
            EntryKind::PrincipalRepayment => "principal_repayment",
            EntryKind::FundingInflow => "funding_inflow",
            EntryKind::ReceivableWriteoff => "receivable_writeoff",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub month: u32,
    pub kind: EntryKind,
    pub amount: Money,
    pub memo: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instrument: Option<Instrument>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Receivable {
    pub accrued_month: u32,
    pub amount: Money,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DebtContract {
    pub principal: Money,
    /// Annual rate in basis points, fixed at settlement.
    pub rate_bps: i64,
    pub start_month: u32,
    pub maturity_month: u32,
    pub repaid: bool,
    /// Month the originating request was made; `None` for opening debt.
    pub request_month: Option<u32>,
}

impl DebtContract {
    pub fn annual_rate(&self) -> f64 {
        self.rate_bps as f64 / 10_000.0
    }

    /// Interest accrues for months `start_month + 1 ..= maturity_month`.
    pub fn is_live(&self, month: u32) -> bool {
        !self.repaid && self.start_month < month && month <= self.maturity_month
    }

    /// One month of interest: `principal * rate / 12`, rounded half up to a cent.
    pub fn monthly_interest(&self) -> Money {
        let num = i128::from(self.principal.cents()) * i128::from(self.rate_bps);
        let den: i128 = 120_000;
        let q = (2 * num + den) / (2 * den);
        let q = if num < 0 {
            -((2 * -num + den) / (2 * den))
        } else {
            q
        };
        Money::from_cents(q as i64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquityRound {
    pub month: u32,
    pub shares_issued: u64,
    pub price_per_share: Money,
    pub amount: Money,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapTable {
    pub initial_shares: u64,
    pub shares_outstanding: u64,
    pub rounds: Vec<EquityRound>,
}

/// What `post_month_operations` did, in posting order.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MonthPosting {
    pub month: u32,
    pub settlements: Vec<SettlementArrival>,
    pub revenue: Money,
    pub collections: Money,
    pub writeoffs: Money,
    pub cogs: Money,
    pub opex: Money,
    pub interest: Money,
    pub principal_repaid: Money,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettlementArrival {
    pub instrument: Instrument,
    pub amount: Money,
    pub request_month: u32,
    /// Debt only: binding annual rate in basis points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_bps: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maturity_month: Option<u32>,
    /// Equity only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shares_issued: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_per_share: Option<Money>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncomeRow {
    pub month: u32,
    pub revenue: Money,
    pub cogs: Money,
    pub gross_profit: Money,
    pub opex: Money,
    pub ebitda: Money,
    pub interest_expense: Money,
    pub credit_losses: Money,
    pub net_income: Money,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CashFlowRow {
    pub month: u32,
    pub operating: Money,
    pub financing: Money,
    pub net_change: Money,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalanceSheet {
    pub cash: Money,
    pub receivables: Money,
    pub total_assets: Money,
    pub debt: Money,
    pub paid_in_capital: Money,
    pub retained_earnings: Money,
    pub equity: Money,
}

/// Costs in the income statement are positive amounts; the cash-flow
/// statement keeps ledger signs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinancialStatements {
    pub as_of_month: u32,
    pub income_statement: Vec<IncomeRow>,
    pub balance_sheet: BalanceSheet,
    pub cash_flow: Vec<CashFlowRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnterpriseState {
    pub month: u32,
    pub initial_cash: Money,
    pub cash: Money,
    pub active_borrowers: u64,
    pub avg_loan_size: Money,
    pub indicators: OperationalIndicators,
    pub accrual_ledger: Vec<LedgerEntry>,
    pub cash_ledger: Vec<LedgerEntry>,
    pub receivables: VecDeque<Receivable>,
    pub debt_contracts: Vec<DebtContract>,
    pub pending_settlements: Vec<PendingSettlement>,
    pub cap_table: CapTable,
    /// Book equity contributed before the episode began.
    pub opening_paid_in: Money,
    pub last_close_month: Option<u32>,
    pub last_statements: Option<FinancialStatements>,
    pub successful_equity_rounds: u32,
    pub tool_calls_total: u64,
    pub posted_through: Option<u32>,
    pub alive: bool,
}

impl EnterpriseState {
    /// Opening state at month 0, before any operations are posted. Opening
    /// debt is carried as a contract priced at month-0 conditions.
    pub fn new(
        company: &CompanyConfig,
        rules: &RuleConfig,
        macro0: &MacroSnapshot,
    ) -> EnterpriseState {
        let mut debt_contracts = Vec::new();
        if company.initial_debt > Money::ZERO {
            debt_contracts.push(DebtContract {
                principal: company.initial_debt,
                rate_bps: contract_rate(macro0, 0.0).rate_bps,
                start_month: 0,
                maturity_month: rules.debt_terms.maturity_months,
                repaid: false,
                request_month: None,
            });
        }
        EnterpriseState {
            month: 0,
            initial_cash: company.initial_cash,
            cash: company.initial_cash,
            active_borrowers: company.initial_borrowers,
            avg_loan_size: company.avg_loan_size,
            indicators: company.initial_indicators,
            accrual_ledger: Vec::new(),
            cash_ledger: Vec::new(),
            receivables: VecDeque::new(),
            debt_contracts,
            pending_settlements: Vec::new(),
            cap_table: CapTable {
                initial_shares: company.shares_outstanding,
                shares_outstanding: company.shares_outstanding,
                rounds: Vec::new(),
            },
            opening_paid_in: company.initial_cash - company.initial_debt,
            last_close_month: None,
            last_statements: None,
            successful_equity_rounds: 0,
            tool_calls_total: 0,
            posted_through: None,
            alive: true,
        }
    }

    pub fn receivables_total(&self) -> Money {
        self.receivables.iter().map(|r| r.amount).sum()
    }

    pub fn debt_outstanding(&self) -> Money {
        self.debt_contracts
            .iter()
            .filter(|c| !c.repaid)
            .map(|c| c.principal)
            .sum()
    }

    pub fn total_assets(&self) -> Money {
        self.cash + self.receivables_total()
    }

    pub fn book_equity(&self) -> Money {
        self.total_assets() - self.debt_outstanding()
    }

    /// Book debt / book equity; infinite when equity is not positive.
    pub fn leverage(&self) -> f64 {
        leverage_ratio(self.debt_outstanding(), self.book_equity())
    }

    /// Cash rebuilt from the cash ledger.
    pub fn reconstructed_cash(&self) -> Money {
        self.initial_cash + self.cash_ledger.iter().map(|e| e.amount).sum::<Money>()
    }

    /// Ledger events newer than the last reconciliation.
    pub fn unreconciled_events(&self) -> usize {
        let newer = |e: &&LedgerEntry| self.last_close_month.is_none_or(|c| e.month > c);
        self.accrual_ledger.iter().filter(newer).count()
            + self.cash_ledger.iter().filter(newer).count()
    }

    fn post_cash(
        &mut self,
        month: u32,
        kind: EntryKind,
        amount: Money,
        memo: &str,
        instrument: Option<Instrument>,
    ) {
        self.cash += amount;
        self.cash_ledger.push(LedgerEntry {
            month,
            kind,
            amount,
            memo: memo.into(),
            instrument,
        });
    }

    fn post_accrual(&mut self, month: u32, kind: EntryKind, amount: Money, memo: &str) {
        self.accrual_ledger.push(LedgerEntry {
            month,
            kind,
            amount,
            memo: memo.into(),
            instrument: None,
        });
    }

    fn post_expense(&mut self, month: u32, kind: EntryKind, cost: Money, memo: &str) {
        self.post_accrual(month, kind, -cost, memo);
        self.post_cash(month, kind, -cost, memo, None);
    }
}

/// Posts one month of operations for `state.month` in fixed order:
/// settlement arrivals, revenue accrual, collection of matured receivables
/// (remainder written off), cogs and opex, debt interest, maturing
/// principal, borrower update. Sets `alive = cash >= 0` afterwards.
pub fn post_month_operations(
    state: &mut EnterpriseState,
    indicators: &OperationalIndicators,
    macro_now: &MacroSnapshot,
    rules: &RuleConfig,
) -> Result<MonthPosting, EngineError> {
    if !state.alive {
        return Err(EngineError::EpisodeOver);
    }
    let t = state.month;
    if state.posted_through.is_some_and(|p| p >= t) {
        return Err(EngineError::ContractViolation(format!(
            "month {t} already posted"
        )));
    }
    state.indicators = *indicators;
    let mut posting = MonthPosting {
        month: t,
        ..MonthPosting::default()
    };

    // (1) settlements due this month
    let (due, later): (Vec<_>, Vec<_>) = std::mem::take(&mut state.pending_settlements)
        .into_iter()
        .partition(|s| s.due_month <= t);
    state.pending_settlements = later;
    for settlement in due {
        posting
            .settlements
            .push(apply_settlement(state, &settlement, macro_now, rules));
    }

    // (2) revenue accrual
    let book = state.active_borrowers as f64 * state.avg_loan_size.cents() as f64;
    let revenue =
        Money::from_cents((book * rules.unit_economics.monthly_yield / 100.0).round() as i64);
    state.post_accrual(t, EntryKind::RevenueAccrual, revenue, "loan book yield");
    posting.revenue = revenue;

    // (3) collect matured receivables
    let lag = rules.unit_economics.receivable_lag;
    while state
        .receivables
        .front()
        .is_some_and(|r| r.accrued_month + lag <= t)
    {
        let tranche = state.receivables.pop_front().expect("front checked");
        let collected = tranche
            .amount
            .scale(indicators.collection_rate.clamp(0.0, 1.0));
        let written_off = tranche.amount - collected;
        state.post_cash(
            t,
            EntryKind::CashCollection,
            collected,
            "borrower remittances",
            None,
        );
        state.post_accrual(
            t,
            EntryKind::ReceivableWriteoff,
            -written_off,
            "uncollected receivables",
        );
        posting.collections += collected;
        posting.writeoffs += written_off;
    }
    state.receivables.push_back(Receivable {
        accrued_month: t,
        amount: revenue,
    });

    // (4) cost of revenue and operating expense
    let gm = indicators.gross_margin / 100.0;
    let em = indicators.ebitda_margin / 100.0;
    let cogs = revenue.scale(1.0 - gm);
    let opex = revenue.scale((gm - em).max(0.0)) + rules.unit_economics.opex_floor;
    state.post_expense(t, EntryKind::Cogs, cogs, "servicing and funding costs");
    state.post_expense(t, EntryKind::Opex, opex, "operating expenses");
    posting.cogs = cogs;
    posting.opex = opex;

    // (5) interest, (6) maturing principal
    let mut interest = Money::ZERO;
    let mut principal = Money::ZERO;
    for i in 0..state.debt_contracts.len() {
        if state.debt_contracts[i].is_live(t) {
            interest += state.debt_contracts[i].monthly_interest();
        }
    }
    if interest != Money::ZERO {
        state.post_expense(t, EntryKind::Interest, interest, "debt interest");
    }
    for i in 0..state.debt_contracts.len() {
        let c = &mut state.debt_contracts[i];
        if !c.repaid && c.maturity_month == t {
            c.repaid = true;
            principal += c.principal;
        }
    }
    if principal != Money::ZERO {
        state.post_cash(
            t,
            EntryKind::PrincipalRepayment,
            -principal,
            "debt principal at maturity",
            Some(Instrument::Debt),
        );
    }
    posting.interest = interest;
    posting.principal_repaid = principal;

    // (7) borrower base
    let grown = state.active_borrowers as f64 * (1.0 + indicators.user_growth / 100.0);
    state.active_borrowers = grown.round().max(0.0) as u64;

    state.posted_through = Some(t);
    state.alive = state.cash >= Money::ZERO;
    debug_assert_eq!(state.cash, state.reconstructed_cash());
    Ok(posting)
}

/// Books an arriving settlement. Debt is priced now, from macro conditions
/// and leverage at settlement (before the new principal lands). Equity is
/// issued at `max(min_price, P/S * TTM revenue / shares)`.
pub fn apply_settlement(
    state: &mut EnterpriseState,
    settlement: &PendingSettlement,
    macro_now: &MacroSnapshot,
    rules: &RuleConfig,
) -> SettlementArrival {
    let t = state.month;
    let mut arrival = SettlementArrival {
        instrument: settlement.instrument,
        amount: settlement.amount_actual,
        request_month: settlement.origin_request_month,
        rate_bps: None,
        maturity_month: None,
        shares_issued: None,
        price_per_share: None,
    };
    match settlement.instrument {
        Instrument::Debt => {
            let leverage = state.leverage().min(rules.debt_terms.leverage_cap);
            let rate = contract_rate(macro_now, leverage);
            let contract = DebtContract {
                principal: settlement.amount_actual,
                rate_bps: rate.rate_bps,
                start_month: t,
                maturity_month: t + rules.debt_terms.maturity_months,
                repaid: false,
                request_month: Some(settlement.origin_request_month),
            };
            arrival.rate_bps = Some(contract.rate_bps);
            arrival.maturity_month = Some(contract.maturity_month);
            state.debt_contracts.push(contract);
            state.post_cash(
                t,
                EntryKind::FundingInflow,
                settlement.amount_actual,
                "debt proceeds",
                Some(Instrument::Debt),
            );
        }
        Instrument::Equity => {
            let ttm = ttm_revenue(state);
            let fair = (macro_now.ps_ratio * ttm.cents() as f64
                / state.cap_table.shares_outstanding as f64)
                .round();
            let price = Money::from_cents(fair as i64).max(rules.equity_pricing.min_share_price);
            let shares = (settlement.amount_actual.cents() / price.cents()).max(0) as u64;
            state.cap_table.shares_outstanding += shares;
            state.cap_table.rounds.push(EquityRound {
                month: t,
                shares_issued: shares,
                price_per_share: price,
                amount: settlement.amount_actual,
            });
            arrival.shares_issued = Some(shares);
            arrival.price_per_share = Some(price);
            state.post_cash(
                t,
                EntryKind::FundingInflow,
                settlement.amount_actual,
                "equity proceeds",
                Some(Instrument::Equity),
            );
        }
    }
    arrival
}

/// Accrued revenue over months `max(0, t-11) ..= t`, not annualized.
pub fn ttm_revenue(state: &EnterpriseState) -> Money {
    let t = state.month;
    let from = t.saturating_sub(11);
    state
        .accrual_ledger
        .iter()
        .filter(|e| e.kind == EntryKind::RevenueAccrual && e.month >= from && e.month <= t)
        .map(|e| e.amount)
        .sum()
}

/// Builds ground-truth statements through `state.month` and records the
/// reconciliation. Idempotent for fixed ledgers.
pub fn close_books(state: &mut EnterpriseState) -> Result<FinancialStatements, EngineError> {
    if !state.alive {
        return Err(EngineError::EpisodeOver);
    }
    let statements = build_statements(state);
    state.last_close_month = Some(state.month);
    state.last_statements = Some(statements.clone());
    Ok(statements)
}

/// Statement construction without side effects. The balance sheet takes
/// cash, receivables and debt from live state and equity from the ledgers,
/// so the accounting identity is a real cross-check.
pub fn build_statements(state: &EnterpriseState) -> FinancialStatements {
    let t = state.month;
    let months = state.posted_through.map_or(0, |p| p.min(t) + 1) as usize;
    let mut income: Vec<IncomeRow> = (0..months as u32)
        .map(|m| IncomeRow {
            month: m,
            revenue: Money::ZERO,
            cogs: Money::ZERO,
            gross_profit: Money::ZERO,
            opex: Money::ZERO,
            ebitda: Money::ZERO,
            interest_expense: Money::ZERO,
            credit_losses: Money::ZERO,
            net_income: Money::ZERO,
        })
        .collect();
    for e in state
        .accrual_ledger
        .iter()
        .filter(|e| (e.month as usize) < months)
    {
        let row = &mut income[e.month as usize];
        match e.kind {
            EntryKind::RevenueAccrual => row.revenue += e.amount,
            EntryKind::Cogs => row.cogs -= e.amount,
            EntryKind::Opex => row.opex -= e.amount,
            EntryKind::Interest => row.interest_expense -= e.amount,
            EntryKind::ReceivableWriteoff => row.credit_losses -= e.amount,
            _ => {}
        }
    }
    for row in &mut income {
        row.gross_profit = row.revenue - row.cogs;
        row.ebitda = row.gross_profit - row.opex;
        row.net_income = row.ebitda - row.interest_expense - row.credit_losses;
    }

    let mut cash_flow: Vec<CashFlowRow> = (0..months as u32)
        .map(|m| CashFlowRow {
            month: m,
            operating: Money::ZERO,
            financing: Money::ZERO,
            net_change: Money::ZERO,
        })
        .collect();
    let mut equity_raised = Money::ZERO;
    for e in state
        .cash_ledger
        .iter()
        .filter(|e| (e.month as usize) < months)
    {
        let row = &mut cash_flow[e.month as usize];
        match e.kind {
            EntryKind::FundingInflow | EntryKind::PrincipalRepayment => row.financing += e.amount,
            _ => row.operating += e.amount,
        }
        row.net_change += e.amount;
        if e.kind == EntryKind::FundingInflow && e.instrument == Some(Instrument::Equity) {
            equity_raised += e.amount;
        }
    }

    let retained_earnings: Money = income.iter().map(|r| r.net_income).sum();
    let paid_in_capital = state.opening_paid_in + equity_raised;
    let receivables = state.receivables_total();
    FinancialStatements {
        as_of_month: t,
        income_statement: income,
        balance_sheet: BalanceSheet {
            cash: state.cash,
            receivables,
            total_assets: state.cash + receivables,
            debt: state.debt_outstanding(),
            paid_in_capital,
            retained_earnings,
            equity: paid_in_capital + retained_earnings,
        },
        cash_flow,
    }
}

/// Both ledgers as CSV: `ledger,month,kind,amount,instrument,memo`.
pub fn ledger_csv(state: &EnterpriseState) -> String {
    let mut out = String::from("ledger,month,kind,amount,instrument,memo\n");
    for (name, ledger) in [
        ("accrual", &state.accrual_ledger),
        ("cash", &state.cash_ledger),
    ] {
        for e in ledger {
            let instrument = e.instrument.map_or("", |i| i.as_str());
            let _ = writeln!(
                out,
                "{name},{},{},{:.2},{instrument},{}",
                e.month,
                e.kind.as_str(),
                e.amount.to_units_f64(),
                e.memo
            );
        }
    }
    out
}
