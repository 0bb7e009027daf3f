use std::sync::Arc;

use arena_core::{EngineError, Episode, EpisodeConfig, EpisodeSummary, Next, Scenario, Transcript};
use rayon::prelude::*;

use crate::metrics::MetricsRow;
use crate::policy::{PolicySpec, Turn};

#[derive(Clone, Debug)]
pub struct EpisodeRun {
    pub seed: u64,
    pub summary: EpisodeSummary,
    pub transcript: Transcript,
}

/// Plays one full episode of `policy` under `seed`.
pub fn run_episode(
    scenario: Arc<Scenario>,
    policy: &PolicySpec,
    seed: u64,
    horizon: Option<u32>,
) -> Result<EpisodeRun, EngineError> {
    let config = EpisodeConfig {
        scenario_id: scenario.id.clone(),
        seed,
        horizon,
        agent_label: policy.label().to_string(),
    };
    let mut episode = Episode::new(config, scenario)?;
    let mut agent = policy.build(seed);
    let mut next = episode.start()?;
    while let Next::Continue { .. } = next {
        let action = agent.play_month(&mut Turn::new(&mut episode));
        let outcome = episode.act(action)?;
        agent.observe_resolution(outcome.month, &outcome.resolution);
        next = outcome.next;
    }
    Ok(EpisodeRun {
        seed,
        summary: episode.summary().clone(),
        transcript: episode.transcript().clone(),
    })
}

/// Runs one episode per seed in parallel. Results come back in ascending
/// seed order regardless of scheduling.
pub fn run_policy(
    scenario: Arc<Scenario>,
    policy: &PolicySpec,
    seeds: &[u64],
    horizon: Option<u32>,
) -> Result<(MetricsRow, Vec<EpisodeRun>), EngineError> {
    let mut runs: Vec<EpisodeRun> = seeds
        .par_iter()
        .map(|&seed| run_episode(Arc::clone(&scenario), policy, seed, horizon))
        .collect::<Result<_, _>>()?;
    runs.sort_by_key(|r| r.seed);
    let summaries: Vec<EpisodeSummary> = runs.iter().map(|r| r.summary.clone()).collect();
    Ok((MetricsRow::from_summaries(policy.label(), &summaries), runs))
}
