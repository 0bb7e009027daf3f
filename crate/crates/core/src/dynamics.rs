//! Internal operational dynamics.
//!
//! Each month every indicator receives independent additive Gaussian noise,
//! `x' = clip(x + eps)`, `eps ~ N(0, sigma^2)`. Anchored indicators
//! (collection rate) are redrawn around their anchor instead of
//! random-walking. Draws come from a per-(indicator, month) stream, so the
//! noise for one indicator never depends on another.

use serde::{Deserialize, Serialize};

use crate::rng::{Domain, Stream};
use crate::scenario::{Coupling, IndustrySnapshot, NoiseSpec, NoiseSpecs};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperationalIndicators {
    /// Percent.
    pub gross_margin: f64,
    /// Percent.
    pub ebitda_margin: f64,
    /// Percent per month.
    pub user_growth: f64,
    /// Fraction of matured receivables collected in cash.
    pub collection_rate: f64,
}

/// Stable stream index per indicator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Indicator {
    GrossMargin = 0,
    EbitdaMargin = 1,
    UserGrowth = 2,
    CollectionRate = 3,
}

/// The four per-indicator draws used for one month.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoiseDraw {
    pub seed: u64,
    pub month: u32,
    pub gross_margin: f64,
    pub ebitda_margin: f64,
    pub user_growth: f64,
    pub collection_rate: f64,
}

impl NoiseDraw {
    /// Standard-normal draws for `(seed, month)`; scale by sigma to apply.
    pub fn sample(seed: u64, month: u32) -> NoiseDraw {
        let z = |ind: Indicator| {
            Stream::new(seed, Domain::Dynamics, ind as u64, month).standard_normal()
        };
        NoiseDraw {
            seed,
            month,
            gross_margin: z(Indicator::GrossMargin),
            ebitda_margin: z(Indicator::EbitdaMargin),
            user_growth: z(Indicator::UserGrowth),
            collection_rate: z(Indicator::CollectionRate),
        }
    }
}

fn step(spec: &NoiseSpec, current: f64, baseline: f64, z: f64) -> f64 {
    let base = if spec.anchored {
        spec.anchor_value.unwrap_or(baseline)
    } else {
        current
    };
    spec.clip(base + spec.sigma * z)
}

/// Applies one month of noise. `baseline_collection` is the anchor used
/// when the collection-rate spec does not carry its own.
pub fn perturb_indicators(
    current: &OperationalIndicators,
    baseline_collection: f64,
    specs: &NoiseSpecs,
    draw: &NoiseDraw,
) -> OperationalIndicators {
    OperationalIndicators {
        gross_margin: step(
            &specs.gross_margin,
            current.gross_margin,
            current.gross_margin,
            draw.gross_margin,
        ),
        ebitda_margin: step(
            &specs.ebitda_margin,
            current.ebitda_margin,
            current.ebitda_margin,
            draw.ebitda_margin,
        ),
        user_growth: step(
            &specs.user_growth,
            current.user_growth,
            current.user_growth,
            draw.user_growth,
        ),
        collection_rate: step(
            &specs.collection_rate,
            current.collection_rate,
            baseline_collection,
            draw.collection_rate,
        ),
    }
}

/// Mean-reverts user growth and EBITDA margin toward the industry series.
pub fn pull_toward_industry(
    current: &OperationalIndicators,
    industry: &IndustrySnapshot,
    coupling: &Coupling,
) -> OperationalIndicators {
    let mut next = *current;
    next.user_growth += coupling.user_growth_pull * (industry.user_growth - current.user_growth);
    next.ebitda_margin +=
        coupling.ebitda_margin_pull * (industry.ebitda_margin - current.ebitda_margin);
    next
}

/// One full monthly transition: industry pull, then noise.
pub fn evolve(
    current: &OperationalIndicators,
    industry: &IndustrySnapshot,
    specs: &NoiseSpecs,
    coupling: &Coupling,
    baseline_collection: f64,
    seed: u64,
    month: u32,
) -> OperationalIndicators {
    let pulled = pull_toward_industry(current, industry, coupling);
    perturb_indicators(
        &pulled,
        baseline_collection,
        specs,
        &NoiseDraw::sample(seed, month),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn start() -> OperationalIndicators {
        OperationalIndicators {
            gross_margin: 50.0,
            ebitda_margin: 20.0,
            user_growth: 1.0,
            collection_rate: 0.97,
        }
    }

    fn zero_sigma() -> NoiseSpecs {
        let mut s = NoiseSpecs::default();
        s.gross_margin.sigma = 0.0;
        s.ebitda_margin.sigma = 0.0;
        s.user_growth.sigma = 0.0;
        s.collection_rate.sigma = 0.0;
        s
    }

    #[test]
    fn zero_sigma_is_identity() {
        let specs = zero_sigma();
        let mut x = start();
        x.collection_rate = 0.9;
        for month in 0..50 {
            let next = perturb_indicators(&x, 0.97, &specs, &NoiseDraw::sample(11, month));
            assert_eq!(next.gross_margin, 50.0);
            assert_eq!(next.ebitda_margin, 20.0);
            assert_eq!(next.user_growth, 1.0);
            assert_eq!(next.collection_rate, 0.97);
            x = next;
        }
    }

    #[test]
    fn large_draw_clips_to_upper_bound() {
        let specs = NoiseSpecs::default();
        let draw = NoiseDraw {
            seed: 0,
            month: 0,
            gross_margin: 22.5, // 50 + 2.0 * 22.5 = 95
            ebitda_margin: 0.0,
            user_growth: 0.0,
            collection_rate: 0.0,
        };
        let next = perturb_indicators(&start(), 0.97, &specs, &draw);
        assert_eq!(next.gross_margin, 80.0);
    }

    #[test]
    fn user_growth_is_unclipped() {
        let specs = NoiseSpecs::default();
        let draw = NoiseDraw {
            seed: 0,
            month: 0,
            gross_margin: 0.0,
            ebitda_margin: 0.0,
            user_growth: -400.0,
            collection_rate: 0.0,
        };
        let next = perturb_indicators(&start(), 0.97, &specs, &draw);
        assert_eq!(next.user_growth, 1.0 - 200.0);
    }

    #[test]
    fn stream_isolation() {
        // A draw for one indicator is a function of (seed, indicator, month) only.
        let d = NoiseDraw::sample(5, 17);
        let mut s = Stream::new(5, Domain::Dynamics, Indicator::UserGrowth as u64, 17);
        assert_eq!(d.user_growth, s.standard_normal());
        let mut other = Stream::new(5, Domain::Dynamics, Indicator::GrossMargin as u64, 17);
        for _ in 0..1000 {
            other.next_u64();
        }
        assert_eq!(NoiseDraw::sample(5, 17).user_growth, d.user_growth);
    }

    #[test]
    fn pull_moves_fraction_of_gap() {
        let ind = IndustrySnapshot {
            month_index: 0,
            user_growth: 3.0,
            gross_margin: 60.0,
            ebitda_margin: 40.0,
        };
        let pulled = pull_toward_industry(&start(), &ind, &Coupling::default());
        assert!((pulled.user_growth - 1.4).abs() < 1e-12);
        assert!((pulled.ebitda_margin - 24.0).abs() < 1e-12);
        assert_eq!(pulled.gross_margin, 50.0);
    }

    proptest! {
        #[test]
        fn clip_containment(seed in any::<u64>(), steps in 1u32..400) {
            let specs = NoiseSpecs::default();
            let mut x = start();
            for month in 0..steps {
                x = perturb_indicators(&x, 0.97, &specs, &NoiseDraw::sample(seed, month));
                prop_assert!((10.0..=80.0).contains(&x.gross_margin));
                prop_assert!((0.0..=60.0).contains(&x.ebitda_margin));
                prop_assert!((0.85..=1.0).contains(&x.collection_rate));
                prop_assert!(x.user_growth.is_finite());
            }
        }
    }
}
