//! Baseline policies, multi-seed runs and the results table.

pub mod metrics;
pub mod policy;
pub mod runner;

pub use metrics::{emit_csv, emit_table, summarize_transcript, MetricsRow};
pub use policy::{Policy, PolicySpec, StewardParams, Turn};
pub use runner::{run_episode, run_policy, EpisodeRun};
