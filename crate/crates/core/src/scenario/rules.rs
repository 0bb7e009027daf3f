use serde::{Deserialize, Serialize};

use super::{CalendarMask, MacroSnapshot};
use crate::money::Money;

/// Additive Gaussian noise for one operational indicator.
///
/// An anchored indicator is redrawn around `anchor_value` each month
/// instead of random-walking from its previous value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub clip_min: Option<f64>,
    pub clip_max: Option<f64>,
    pub anchored: bool,
    pub anchor_value: Option<f64>,
}

impl NoiseSpec {
    pub fn clip(&self, x: f64) -> f64 {
        let lo = self.clip_min.unwrap_or(f64::NEG_INFINITY);
        let hi = self.clip_max.unwrap_or(f64::INFINITY);
        x.clamp(lo, hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpecs {
    pub gross_margin: NoiseSpec,
    pub ebitda_margin: NoiseSpec,
    pub user_growth: NoiseSpec,
    pub collection_rate: NoiseSpec,
}

impl Default for NoiseSpecs {
    fn default() -> Self {
        NoiseSpecs {
            gross_margin: NoiseSpec {
                sigma: 2.0,
                clip_min: Some(10.0),
                clip_max: Some(80.0),
                anchored: false,
                anchor_value: None,
            },
            ebitda_margin: NoiseSpec {
                sigma: 1.5,
                clip_min: Some(0.0),
                clip_max: Some(60.0),
                anchored: false,
                anchor_value: None,
            },
            user_growth: NoiseSpec {
                sigma: 0.5,
                clip_min: None,
                clip_max: None,
                anchored: false,
                anchor_value: None,
            },
            collection_rate: NoiseSpec {
                sigma: 0.04,
                clip_min: Some(0.85),
                clip_max: Some(1.0),
                anchored: true,
                anchor_value: Some(0.97),
            },
        }
    }
}

/// Monthly pull of firm indicators toward the industry series, applied
/// before noise. 0 disables the coupling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coupling {
    pub user_growth_pull: f64,
    pub ebitda_margin_pull: f64,
}

impl Default for Coupling {
    fn default() -> Self {
        Coupling {
            user_growth_pull: 0.2,
            ebitda_margin_pull: 0.2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Driver {
    Vix,
    Sofr,
    FedFunds,
    Tsy2y,
    BaaOas,
}

impl Driver {
    pub fn read(self, m: &MacroSnapshot) -> f64 {
        match self {
            Driver::Vix => m.vix,
            Driver::Sofr => m.sofr,
            Driver::FedFunds => m.fed_funds,
            Driver::Tsy2y => m.tsy2y,
            Driver::BaaOas => m.baa_oas,
        }
    }
}

/// Piecewise-linear map from a macro driver to a success probability,
/// flat beyond the first and last knots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbMap {
    pub driver: Driver,
    /// `[driver_value, probability]`, strictly increasing in driver value.
    pub knots: Vec<[f64; 2]>,
}

impl ProbMap {
    pub fn eval(&self, x: f64) -> f64 {
        let p = match self.knots.as_slice() {
            [] => 0.0,
            [only] => only[1],
            knots => {
                let first = knots[0];
                let last = knots[knots.len() - 1];
                if x <= first[0] {
                    first[1]
                } else if x >= last[0] {
                    last[1]
                } else {
                    let i = knots.partition_point(|k| k[0] <= x);
                    let (a, b) = (knots[i - 1], knots[i]);
                    a[1] + (b[1] - a[1]) * (x - a[0]) / (b[0] - a[0])
                }
            }
        };
        p.clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbMaps {
    pub equity: ProbMap,
    pub debt: ProbMap,
}

impl Default for ProbMaps {
    fn default() -> Self {
        ProbMaps {
            equity: ProbMap {
                driver: Driver::Vix,
                knots: vec![[12.0, 0.95], [40.0, 0.05]],
            },
            debt: ProbMap {
                driver: Driver::Sofr,
                knots: vec![[0.0, 0.95], [8.0, 0.20]],
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitEconomics {
    /// Percent of the loan book accrued as revenue each month.
    pub monthly_yield: f64,
    pub opex_floor: Money,
    /// Months between revenue accrual and cash collection.
    pub receivable_lag: u32,
}

impl Default for UnitEconomics {
    fn default() -> Self {
        UnitEconomics {
            monthly_yield: 1.5,
            opex_floor: Money::from_units(650_000),
            receivable_lag: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Repayment {
    Bullet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DebtTerms {
    pub maturity_months: u32,
    pub repayment: Repayment,
    /// Leverage used for rate pricing when book equity is not positive.
    pub leverage_cap: f64,
}

impl Default for DebtTerms {
    fn default() -> Self {
        DebtTerms {
            maturity_months: 60,
            repayment: Repayment::Bullet,
            leverage_cap: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquityPricing {
    pub min_share_price: Money,
}

impl Default for EquityPricing {
    fn default() -> Self {
        EquityPricing {
            min_share_price: Money::from_units(1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Valuation {
    /// Revenue multiple applied to trailing-twelve-month revenue.
    pub multiple: f64,
    /// Charge per successful observation tool call.
    pub tool_penalty: Money,
}

impl Default for Valuation {
    fn default() -> Self {
        Valuation {
            multiple: 5.0,
            tool_penalty: Money::from_units(5_000),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleConfig {
    pub noise_specs: NoiseSpecs,
    pub coupling: Coupling,
    pub prob_maps: ProbMaps,
    pub unit_economics: UnitEconomics,
    pub debt_terms: DebtTerms,
    pub equity_pricing: EquityPricing,
    pub valuation: Valuation,
    pub tool_budget: u32,
    pub fill_range: [f64; 2],
    pub delay_range: [u32; 2],
    pub calendar: CalendarMask,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            noise_specs: NoiseSpecs::default(),
            coupling: Coupling::default(),
            prob_maps: ProbMaps::default(),
            unit_economics: UnitEconomics::default(),
            debt_terms: DebtTerms::default(),
            equity_pricing: EquityPricing::default(),
            valuation: Valuation::default(),
            tool_budget: 20,
            fill_range: [0.70, 1.00],
            delay_range: [1, 6],
            calendar: CalendarMask::default(),
        }
    }
}
