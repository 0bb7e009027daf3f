//! Synthetic exogenous trajectories.
//!
//! The generator lays out contiguous regime blocks in the order
//! expansion → recession → neutral (recovery). Each series tracks a
//! per-regime target level through exponential smoothing, so regime changes
//! phase in over a few months, and carries seeded AR(1) noise. Values are
//! rounded to four decimals so bundles stay readable.
//!
//! Recession blocks have elevated VIX, elevated short rates and credit
//! spreads, negative industry user growth and depressed industry margins.

use super::{
    CompanyConfig, IndustrySnapshot, MacroSnapshot, Regime, RuleConfig, Scenario, DEFAULT_HORIZON,
};
use crate::error::ScenarioError;
use crate::rng::{Domain, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RegimeProfile {
    pub expansion_months: u32,
    pub recession_months: u32,
    pub neutral_months: u32,
}

impl RegimeProfile {
    pub const fn new(expansion_months: u32, recession_months: u32, neutral_months: u32) -> Self {
        RegimeProfile {
            expansion_months,
            recession_months,
            neutral_months,
        }
    }

    pub fn total(&self) -> u32 {
        self.expansion_months + self.recession_months + self.neutral_months
    }

    pub fn labels(&self) -> Vec<Regime> {
        let mut v = Vec::with_capacity(self.total() as usize);
        v.extend(std::iter::repeat_n(
            Regime::Expansion,
            self.expansion_months as usize,
        ));
        v.extend(std::iter::repeat_n(
            Regime::Recession,
            self.recession_months as usize,
        ));
        v.extend(std::iter::repeat_n(
            Regime::Neutral,
            self.neutral_months as usize,
        ));
        v
    }
}

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_PROFILE: RegimeProfile = RegimeProfile::new(40, 30, 62);

/// Target level per regime, in (expansion, recession, neutral) order, with
/// smoothing rate, noise scale and noise persistence.
struct SeriesSpec {
    levels: [f64; 3],
    smoothing: f64,
    sigma: f64,
    persistence: f64,
}

const fn spec(levels: [f64; 3], smoothing: f64, sigma: f64, persistence: f64) -> SeriesSpec {
    SeriesSpec {
        levels,
        smoothing,
        sigma,
        persistence,
    }
}

// Stream indices are stable; append only.
const GDP: (u64, SeriesSpec) = (0, spec([2.8, -2.0, 2.2], 0.25, 0.25, 0.6));
const INFLATION: (u64, SeriesSpec) = (1, spec([0.18, 0.05, 0.25], 0.2, 0.04, 0.3));
const UNEMPLOYMENT: (u64, SeriesSpec) = (2, spec([4.2, 8.5, 5.0], 0.12, 0.08, 0.7));
const FED_FUNDS: (u64, SeriesSpec) = (3, spec([0.4, 5.1, 3.2], 0.2, 0.04, 0.8));
const SOFR_BASIS: (u64, SeriesSpec) = (4, spec([-0.04, -0.03, -0.05], 0.5, 0.02, 0.2));
const TERM_2Y: (u64, SeriesSpec) = (5, spec([0.35, -0.25, 0.2], 0.2, 0.05, 0.7));
const TERM_5Y: (u64, SeriesSpec) = (6, spec([0.45, -0.1, 0.3], 0.2, 0.04, 0.7));
const TERM_10Y: (u64, SeriesSpec) = (7, spec([0.4, 0.1, 0.3], 0.2, 0.04, 0.7));
const TERM_30Y: (u64, SeriesSpec) = (8, spec([0.35, 0.2, 0.3], 0.2, 0.03, 0.7));
const BAA_OAS: (u64, SeriesSpec) = (9, spec([1.6, 3.6, 2.0], 0.25, 0.08, 0.7));
const VIX: (u64, SeriesSpec) = (10, spec([14.0, 31.0, 18.0], 0.35, 1.4, 0.5));
const PE: (u64, SeriesSpec) = (11, spec([22.0, 15.0, 19.5], 0.2, 0.4, 0.7));
const PS: (u64, SeriesSpec) = (12, spec([2.4, 1.4, 2.1], 0.2, 0.05, 0.7));
const IND_GROWTH: (u64, SeriesSpec) = (13, spec([2.5, -3.0, 1.8], 0.3, 0.2, 0.5));
const IND_GROSS: (u64, SeriesSpec) = (14, spec([62.0, 48.0, 58.0], 0.25, 0.5, 0.6));
const IND_EBITDA: (u64, SeriesSpec) = (15, spec([42.0, 2.0, 36.0], 0.25, 0.5, 0.6));

struct Track<'a> {
    seed: u64,
    index: u64,
    spec: &'a SeriesSpec,
    level: f64,
    noise: f64,
}

impl<'a> Track<'a> {
    fn new(seed: u64, (index, spec): &'a (u64, SeriesSpec), first: Regime) -> Self {
        Track {
            seed,
            index: *index,
            spec,
            level: spec.levels[slot(first)],
            noise: 0.0,
        }
    }

    fn step(&mut self, month: u32, regime: Regime) -> f64 {
        let target = self.spec.levels[slot(regime)];
        self.level += self.spec.smoothing * (target - self.level);
        let mut s = Stream::new(self.seed, Domain::Synthetic, self.index, month);
        self.noise = self.spec.persistence * self.noise + s.normal(self.spec.sigma);
        self.level + self.noise
    }
}

fn slot(r: Regime) -> usize {
    match r {
        Regime::Expansion => 0,
        Regime::Recession => 1,
        Regime::Neutral => 2,
    }
}

fn r4(x: f64) -> f64 {
    let v = (x * 10_000.0).round() / 10_000.0;
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

/// Builds a scenario of `profile.total()` months with default company and
/// rules. Deterministic in `(seed, profile)`.
pub fn generate_synthetic_scenario(
    seed: u64,
    profile: RegimeProfile,
) -> Result<Scenario, ScenarioError> {
    generate_with_horizon(seed, profile, DEFAULT_HORIZON)
}

pub(crate) fn generate_with_horizon(
    seed: u64,
    profile: RegimeProfile,
    horizon: u32,
) -> Result<Scenario, ScenarioError> {
    if profile.total() != horizon || horizon == 0 {
        return Err(ScenarioError::BadProfile {
            sum: profile.total(),
            horizon,
        });
    }
    let labels = profile.labels();
    let first = labels[0];

    let mut gdp = Track::new(seed, &GDP, first);
    let mut inflation = Track::new(seed, &INFLATION, first);
    let mut unemployment = Track::new(seed, &UNEMPLOYMENT, first);
    let mut fed = Track::new(seed, &FED_FUNDS, first);
    let mut sofr_basis = Track::new(seed, &SOFR_BASIS, first);
    let mut t2 = Track::new(seed, &TERM_2Y, first);
    let mut t5 = Track::new(seed, &TERM_5Y, first);
    let mut t10 = Track::new(seed, &TERM_10Y, first);
    let mut t30 = Track::new(seed, &TERM_30Y, first);
    let mut baa = Track::new(seed, &BAA_OAS, first);
    let mut vix = Track::new(seed, &VIX, first);
    let mut pe = Track::new(seed, &PE, first);
    let mut ps = Track::new(seed, &PS, first);
    let mut ind_growth = Track::new(seed, &IND_GROWTH, first);
    let mut ind_gross = Track::new(seed, &IND_GROSS, first);
    let mut ind_ebitda = Track::new(seed, &IND_EBITDA, first);

    let mut cpi = 237.0;
    let mut macro_series = Vec::with_capacity(horizon as usize);
    let mut industry_series = Vec::with_capacity(horizon as usize);

    for (t, &regime) in labels.iter().enumerate() {
        let m = t as u32;
        if m > 0 {
            cpi *= 1.0 + inflation.step(m, regime) / 100.0;
        } else {
            inflation.step(m, regime);
        }
        let fed_funds = fed.step(m, regime).max(0.05);
        let sofr = (fed_funds + sofr_basis.step(m, regime)).max(0.01);
        let tsy2y = (fed_funds + t2.step(m, regime)).max(0.05);
        let tsy5y = (tsy2y + t5.step(m, regime)).max(0.05);
        let tsy10y = (tsy5y + t10.step(m, regime)).max(0.05);
        let tsy30y = (tsy10y + t30.step(m, regime)).max(0.05);
        macro_series.push(MacroSnapshot {
            month_index: m,
            gdp_growth: r4(gdp.step(m, regime)),
            cpi: r4(cpi),
            unemployment: r4(unemployment.step(m, regime).max(2.0)),
            fed_funds: r4(fed_funds),
            sofr: r4(sofr),
            tsy2y: r4(tsy2y),
            tsy5y: r4(tsy5y),
            tsy10y: r4(tsy10y),
            tsy30y: r4(tsy30y),
            baa_oas: r4(baa.step(m, regime).max(0.3)),
            vix: r4(vix.step(m, regime).max(9.0)),
            pe_ratio: r4(pe.step(m, regime).max(5.0)),
            ps_ratio: r4(ps.step(m, regime).max(0.3)),
        });
        industry_series.push(IndustrySnapshot {
            month_index: m,
            user_growth: r4(ind_growth.step(m, regime)),
            gross_margin: r4(ind_gross.step(m, regime).clamp(-100.0, 100.0)),
            ebitda_margin: r4(ind_ebitda.step(m, regime).clamp(-100.0, 100.0)),
        });
    }

    Ok(Scenario {
        id: format!(
            "synthetic-s{seed}-{}-{}-{}",
            profile.expansion_months, profile.recession_months, profile.neutral_months
        ),
        horizon,
        macro_series,
        industry_series,
        initial_company: CompanyConfig::default(),
        rules: RuleConfig::default(),
        regime_labels: labels,
    })
}
