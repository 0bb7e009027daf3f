//! Scenario data: the exogenous macro and industry trajectories, the
//! company's starting position, and every rule parameter of the environment.
//!
//! A scenario is immutable once loaded and is shared read-only (behind an
//! `Arc`) by any number of concurrently running episodes.

mod bundle;
mod calendar;
mod rules;
mod synth;
mod validate;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::OperationalIndicators;
use crate::error::ScenarioError;
use crate::money::Money;

pub use bundle::{load_scenario, save_scenario, INDUSTRY_HEADER, MACRO_HEADER};
pub use calendar::{anonymize_label, CalendarMask};
pub use rules::{
    Coupling, DebtTerms, Driver, EquityPricing, NoiseSpec, NoiseSpecs, ProbMap, ProbMaps,
    Repayment, RuleConfig, UnitEconomics, Valuation,
};
pub use synth::{generate_synthetic_scenario, RegimeProfile, DEFAULT_PROFILE, DEFAULT_SEED};
pub use validate::{validate_scenario, ValidationIssue, ValidationReport};

pub const DEFAULT_HORIZON: u32 = 132;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroSnapshot {
    pub month_index: u32,
    pub gdp_growth: f64,
    pub cpi: f64,
    pub unemployment: f64,
    pub fed_funds: f64,
    pub sofr: f64,
    pub tsy2y: f64,
    pub tsy5y: f64,
    pub tsy10y: f64,
    pub tsy30y: f64,
    pub baa_oas: f64,
    pub vix: f64,
    pub pe_ratio: f64,
    pub ps_ratio: f64,
}

impl MacroSnapshot {
    /// Base lending rate as a fraction: (2Y Treasury + Baa spread) / 100.
    pub fn base_lending_rate(&self) -> f64 {
        (self.tsy2y + self.baa_oas) / 100.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndustrySnapshot {
    pub month_index: u32,
    pub user_growth: f64,
    pub gross_margin: f64,
    pub ebitda_margin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Expansion,
    Neutral,
    Recession,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Expansion => "expansion",
            Regime::Neutral => "neutral",
            Regime::Recession => "recession",
        }
    }

    pub fn parse(s: &str) -> Option<Regime> {
        match s {
            "expansion" => Some(Regime::Expansion),
            "neutral" => Some(Regime::Neutral),
            "recession" => Some(Regime::Recession),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub title: String,
    pub body: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shareholder {
    pub holder: String,
    pub shares: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoardMaterials {
    pub business_overview: Document,
    pub cap_table: Vec<Shareholder>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VendorContract {
    pub vendor: String,
    pub service: String,
    pub monthly_fee: Money,
    pub term_months: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompanyConfig {
    pub name: String,
    pub initial_cash: Money,
    pub initial_borrowers: u64,
    pub avg_loan_size: Money,
    pub initial_debt: Money,
    pub shares_outstanding: u64,
    pub initial_share_price: Money,
    pub initial_indicators: OperationalIndicators,
    pub board_materials: BoardMaterials,
    pub vendor_contracts: Vec<VendorContract>,
}

impl Default for CompanyConfig {
    fn default() -> Self {
        let shares = 10_500_000;
        CompanyConfig {
            name: "Company XYZ".into(),
            initial_cash: Money::from_units(15_000_000),
            initial_borrowers: 5_000,
            avg_loan_size: Money::from_units(10_000),
            initial_debt: Money::ZERO,
            shares_outstanding: shares,
            initial_share_price: Money::from_units(10),
            initial_indicators: OperationalIndicators {
                gross_margin: 60.0,
                ebitda_margin: 30.0,
                user_growth: 1.0,
                collection_rate: 0.97,
            },
            board_materials: BoardMaterials {
                business_overview: Document {
                    title: "Business overview".into(),
                    body: "Company XYZ is a consumer lending platform originating unsecured \
                           installment loans to retail borrowers through a mobile channel. \
                           Revenue is interest and fee yield on the outstanding loan book; \
                           operating costs are servicing, funding operations, technology and \
                           a fixed corporate overhead."
                        .into(),
                },
                cap_table: vec![
                    Shareholder {
                        holder: "Founders".into(),
                        shares: 4_200_000,
                    },
                    Shareholder {
                        holder: "Series A investors".into(),
                        shares: 3_150_000,
                    },
                    Shareholder {
                        holder: "Series B investors".into(),
                        shares: 2_100_000,
                    },
                    Shareholder {
                        holder: "Employee option pool".into(),
                        shares: shares - 9_450_000,
                    },
                ],
            },
            vendor_contracts: vec![
                VendorContract {
                    vendor: "Vendor A".into(),
                    service: "Cloud hosting and data platform".into(),
                    monthly_fee: Money::from_units(180_000),
                    term_months: 36,
                },
                VendorContract {
                    vendor: "Vendor B".into(),
                    service: "Loan servicing and collections".into(),
                    monthly_fee: Money::from_units(240_000),
                    term_months: 24,
                },
                VendorContract {
                    vendor: "Vendor C".into(),
                    service: "Credit bureau and identity verification".into(),
                    monthly_fee: Money::from_units(90_000),
                    term_months: 12,
                },
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub horizon: u32,
    pub macro_series: Vec<MacroSnapshot>,
    pub industry_series: Vec<IndustrySnapshot>,
    pub initial_company: CompanyConfig,
    pub rules: RuleConfig,
    /// Hidden from agents; used by the generator and by ablations.
    pub regime_labels: Vec<Regime>,
}

impl Scenario {
    /// The default scenario: the synthetic generator at its documented seed
    /// and profile, with default company and rules.
    pub fn default_scenario() -> Scenario {
        let mut s = generate_synthetic_scenario(DEFAULT_SEED, DEFAULT_PROFILE)
            .expect("default profile sums to the default horizon");
        s.id = "default".into();
        s
    }

    /// Exogenous snapshots for month `t`.
    pub fn external_at(
        &self,
        t: u32,
    ) -> Result<(&MacroSnapshot, &IndustrySnapshot), ScenarioError> {
        if t >= self.horizon {
            return Err(ScenarioError::OutOfRange {
                month: t,
                horizon: self.horizon,
            });
        }
        Ok((
            &self.macro_series[t as usize],
            &self.industry_series[t as usize],
        ))
    }

    pub fn label(&self, month: u32) -> Result<String, ScenarioError> {
        anonymize_label(month, self.horizon, &self.rules.calendar)
    }
}

/// Read-only set of scenarios addressable by id.
#[derive(Clone, Debug, Default)]
pub struct ScenarioCatalog {
    scenarios: BTreeMap<String, Arc<Scenario>>,
}

impl ScenarioCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_default() -> Self {
        let mut c = Self::new();
        c.insert(Scenario::default_scenario());
        c
    }

    pub fn insert(&mut self, scenario: Scenario) -> Arc<Scenario> {
        let arc = Arc::new(scenario);
        self.scenarios.insert(arc.id.clone(), arc.clone());
        arc
    }

    pub fn get(&self, id: &str) -> Option<Arc<Scenario>> {
        self.scenarios.get(id).cloned()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<Scenario>> {
        self.scenarios.values()
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }
}
