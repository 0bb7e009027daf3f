use std::fmt;

use serde::Serialize;

use super::{NoiseSpec, ProbMap, Scenario};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationIssue {
    pub path: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ValidationIssue {
            path: path.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "  {}: {}", issue.path, issue.message)?;
        }
        Ok(())
    }
}

/// Lists every invariant violation in `scenario`; empty iff usable.
pub fn validate_scenario(scenario: &Scenario) -> ValidationReport {
    let mut r = ValidationReport::default();
    let t = scenario.horizon as usize;

    if scenario.horizon == 0 {
        r.push("horizon", "must be at least one month");
    }
    if scenario.macro_series.len() != t {
        r.push(
            "macro_series",
            format!("length {} != horizon {t}", scenario.macro_series.len()),
        );
    }
    if scenario.industry_series.len() != t {
        r.push(
            "industry_series",
            format!("length {} != horizon {t}", scenario.industry_series.len()),
        );
    }
    if scenario.regime_labels.len() != t {
        r.push(
            "regime_labels",
            format!("length {} != horizon {t}", scenario.regime_labels.len()),
        );
    }

    for (i, m) in scenario.macro_series.iter().enumerate() {
        let p = format!("macro_series[{i}]");
        if m.month_index as usize != i {
            r.push(
                format!("{p}.month_index"),
                format!("expected {i}, found {}", m.month_index),
            );
        }
        let rates = [
            ("gdp_growth", m.gdp_growth),
            ("cpi", m.cpi),
            ("unemployment", m.unemployment),
            ("fed_funds", m.fed_funds),
            ("sofr", m.sofr),
            ("tsy2y", m.tsy2y),
            ("tsy5y", m.tsy5y),
            ("tsy10y", m.tsy10y),
            ("tsy30y", m.tsy30y),
            ("baa_oas", m.baa_oas),
        ];
        for (name, v) in rates {
            if !v.is_finite() {
                r.push(format!("{p}.{name}"), "not finite");
            }
        }
        for (name, v) in [
            ("vix", m.vix),
            ("pe_ratio", m.pe_ratio),
            ("ps_ratio", m.ps_ratio),
        ] {
            if !(v.is_finite() && v > 0.0) {
                r.push(
                    format!("{p}.{name}"),
                    format!("must be positive, found {v}"),
                );
            }
        }
    }

    for (i, s) in scenario.industry_series.iter().enumerate() {
        let p = format!("industry_series[{i}]");
        if s.month_index as usize != i {
            r.push(
                format!("{p}.month_index"),
                format!("expected {i}, found {}", s.month_index),
            );
        }
        if !s.user_growth.is_finite() {
            r.push(format!("{p}.user_growth"), "not finite");
        }
        for (name, v) in [
            ("gross_margin", s.gross_margin),
            ("ebitda_margin", s.ebitda_margin),
        ] {
            if !(v.is_finite() && (-100.0..=100.0).contains(&v)) {
                r.push(
                    format!("{p}.{name}"),
                    format!("must lie in [-100, 100], found {v}"),
                );
            }
        }
    }

    let c = &scenario.initial_company;
    if c.initial_cash.is_negative() {
        r.push("initial_company.initial_cash", "must be non-negative");
    }
    if c.initial_debt.is_negative() {
        r.push("initial_company.initial_debt", "must be non-negative");
    }
    if c.avg_loan_size.is_negative() {
        r.push("initial_company.avg_loan_size", "must be non-negative");
    }
    if c.shares_outstanding == 0 {
        r.push("initial_company.shares_outstanding", "must be positive");
    }
    let ind = &c.initial_indicators;
    for (name, v) in [
        ("gross_margin", ind.gross_margin),
        ("ebitda_margin", ind.ebitda_margin),
        ("user_growth", ind.user_growth),
        ("collection_rate", ind.collection_rate),
    ] {
        if !v.is_finite() {
            r.push(
                format!("initial_company.initial_indicators.{name}"),
                "not finite",
            );
        }
    }

    let rules = &scenario.rules;
    let ns = &rules.noise_specs;
    for (name, spec) in [
        ("gross_margin", &ns.gross_margin),
        ("ebitda_margin", &ns.ebitda_margin),
        ("user_growth", &ns.user_growth),
        ("collection_rate", &ns.collection_rate),
    ] {
        check_noise(&mut r, &format!("rules.noise_specs.{name}"), spec);
    }
    for (name, v) in [
        ("user_growth_pull", rules.coupling.user_growth_pull),
        ("ebitda_margin_pull", rules.coupling.ebitda_margin_pull),
    ] {
        if !(0.0..=1.0).contains(&v) {
            r.push(
                format!("rules.coupling.{name}"),
                format!("must lie in [0, 1], found {v}"),
            );
        }
    }
    check_map(&mut r, "rules.prob_maps.equity", &rules.prob_maps.equity);
    check_map(&mut r, "rules.prob_maps.debt", &rules.prob_maps.debt);

    let ue = &rules.unit_economics;
    if !(ue.monthly_yield.is_finite() && ue.monthly_yield >= 0.0) {
        r.push(
            "rules.unit_economics.monthly_yield",
            "must be a non-negative percent",
        );
    }
    if ue.opex_floor.is_negative() {
        r.push("rules.unit_economics.opex_floor", "must be non-negative");
    }
    if ue.receivable_lag == 0 {
        r.push(
            "rules.unit_economics.receivable_lag",
            "must be at least one month",
        );
    }
    if rules.debt_terms.maturity_months == 0 {
        r.push(
            "rules.debt_terms.maturity_months",
            "must be at least one month",
        );
    }
    if !(rules.debt_terms.leverage_cap.is_finite() && rules.debt_terms.leverage_cap > 0.0) {
        r.push("rules.debt_terms.leverage_cap", "must be positive");
    }
    if rules.equity_pricing.min_share_price <= crate::Money::ZERO {
        r.push("rules.equity_pricing.min_share_price", "must be positive");
    }
    if !(rules.valuation.multiple.is_finite() && rules.valuation.multiple >= 0.0) {
        r.push("rules.valuation.multiple", "must be non-negative");
    }
    if rules.valuation.tool_penalty.is_negative() {
        r.push("rules.valuation.tool_penalty", "must be non-negative");
    }
    if rules.tool_budget == 0 {
        r.push("rules.tool_budget", "must be positive");
    }
    let [f_lo, f_hi] = rules.fill_range;
    if !(f_lo > 0.0 && f_lo <= f_hi && f_hi <= 1.0) {
        r.push(
            "rules.fill_range",
            format!("must satisfy 0 < lo <= hi <= 1, found [{f_lo}, {f_hi}]"),
        );
    }
    let [d_lo, d_hi] = rules.delay_range;
    if !(d_lo >= 1 && d_lo <= d_hi) {
        r.push(
            "rules.delay_range",
            format!("must satisfy 1 <= lo <= hi, found [{d_lo}, {d_hi}]"),
        );
    }
    if rules.calendar.start_month_of_year >= 12 {
        r.push("rules.calendar.start_month_of_year", "must lie in 0..12");
    }
    r
}

fn check_noise(r: &mut ValidationReport, path: &str, spec: &NoiseSpec) {
    if !(spec.sigma.is_finite() && spec.sigma >= 0.0) {
        r.push(format!("{path}.sigma"), "must be non-negative");
    }
    if let (Some(lo), Some(hi)) = (spec.clip_min, spec.clip_max) {
        if !(lo < hi) {
            r.push(path, format!("clip_min {lo} must be below clip_max {hi}"));
        }
    }
    if spec.anchored && spec.anchor_value.is_none() {
        r.push(format!("{path}.anchor_value"), "required when anchored");
    }
}

fn check_map(r: &mut ValidationReport, path: &str, map: &ProbMap) {
    if map.knots.is_empty() {
        r.push(format!("{path}.knots"), "at least one knot required");
    }
    for (i, k) in map.knots.iter().enumerate() {
        if !(k[0].is_finite() && k[1].is_finite()) {
            r.push(format!("{path}.knots[{i}]"), "not finite");
        }
        if !(0.0..=1.0).contains(&k[1]) {
            r.push(
                format!("{path}.knots[{i}]"),
                format!("probability {} outside [0, 1]", k[1]),
            );
        }
        if i > 0 && !(map.knots[i - 1][0] < k[0]) {
            r.push(
                format!("{path}.knots[{i}]"),
                "driver values must be strictly increasing",
            );
        }
    }
}
