use std::collections::BTreeMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use arena_core::scenario::{
    generate_synthetic_scenario, load_scenario, save_scenario, RegimeProfile,
};
use arena_core::{replay, Scenario, ScenarioCatalog, Transcript};
use arena_harness::{
    emit_csv, emit_table, run_policy, summarize_transcript, MetricsRow, PolicySpec,
};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "arena",
    version,
    about = "Monthly CFO resource-allocation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a baseline policy over a range of seeds and write transcripts and metrics.
    Run {
        /// Scenario bundle directory, or `default` for the built-in scenario.
        #[arg(long, default_value = "default")]
        scenario: String,
        /// pass_only, random or steward.
        #[arg(long, default_value = "steward")]
        policy: String,
        /// Inclusive range `a..b`, a comma list, or a single seed.
        #[arg(long, default_value = "0..99")]
        seeds: String,
        #[arg(long)]
        horizon: Option<u32>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Recompute the metrics table from a directory of transcripts.
    Eval {
        #[arg(long)]
        transcripts: PathBuf,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Generate a synthetic scenario bundle.
    GenScenario {
        #[arg(long, default_value_t = arena_core::scenario::DEFAULT_SEED)]
        seed: u64,
        /// Months of expansion, recession and neutral, in that order.
        #[arg(long, default_value = "40,30,62")]
        profile: String,
        /// Output directory; its name becomes the scenario id.
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve episodes over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Extra scenario bundle directories to offer besides the default.
        #[arg(long = "scenario")]
        scenarios: Vec<PathBuf>,
        /// Write finished session transcripts here.
        #[arg(long)]
        transcripts: Option<PathBuf>,
    },
    /// Re-execute a transcript and check it reproduces byte for byte.
    Replay {
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long, default_value = "default")]
        scenario: String,
    },
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Run {
            scenario,
            policy,
            seeds,
            horizon,
            out,
        } => run(&scenario, &policy, &seeds, horizon, &out),
        Command::Eval { transcripts, csv } => eval(&transcripts, csv.as_deref()),
        Command::GenScenario { seed, profile, out } => gen_scenario(seed, &profile, &out),
        Command::Serve {
            addr,
            scenarios,
            transcripts,
        } => serve(addr, &scenarios, transcripts),
        Command::Replay {
            transcript,
            scenario,
        } => replay_cmd(&transcript, &scenario),
    }
}

fn load(scenario: &str) -> Result<Scenario> {
    if scenario == "default" {
        return Ok(Scenario::default_scenario());
    }
    load_scenario(Path::new(scenario)).with_context(|| format!("loading scenario {scenario}"))
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = spec.split_once("..") {
        let a: u64 = a.trim().parse().context("seed range start")?;
        let b: u64 = b
            .trim()
            .trim_start_matches('=')
            .parse()
            .context("seed range end")?;
        if a > b {
            bail!("empty seed range {spec}");
        }
        return Ok((a..=b).collect());
    }
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .with_context(|| format!("bad seed '{s}'"))
        })
        .collect()
}

fn parse_profile(spec: &str) -> Result<RegimeProfile> {
    let parts: Vec<u32> = spec
        .split(',')
        .map(|s| s.trim().parse::<u32>())
        .collect::<Result<_, _>>()
        .context("profile")?;
    let [e, r, n] = parts[..] else {
        bail!("profile needs three counts: expansion,recession,neutral")
    };
    Ok(RegimeProfile::new(e, r, n))
}

fn run(scenario: &str, policy: &str, seeds: &str, horizon: Option<u32>, out: &Path) -> Result<()> {
    let scenario = Arc::new(load(scenario)?);
    let spec = PolicySpec::parse(policy).with_context(|| format!("unknown policy '{policy}'"))?;
    let seeds = parse_seeds(seeds)?;
    let (row, runs) = run_policy(Arc::clone(&scenario), &spec, &seeds, horizon)?;

    let dir = out.join("transcripts");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for r in &runs {
        let path = dir.join(format!("{}-seed{:04}.jsonl", spec.label(), r.seed));
        r.transcript
            .write_to(&path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let table = emit_table(std::slice::from_ref(&row));
    fs::write(out.join(format!("{}-metrics.txt", spec.label())), &table)?;
    fs::write(
        out.join(format!("{}-metrics.csv", spec.label())),
        emit_csv(std::slice::from_ref(&row))?,
    )?;
    print!("{table}");
    eprintln!(
        "{} episodes on scenario '{}', transcripts in {}",
        runs.len(),
        scenario.id,
        dir.display()
    );
    Ok(())
}

fn eval(dir: &Path, csv: Option<&Path>) -> Result<()> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    let mut by_policy: BTreeMap<String, Vec<_>> = BTreeMap::new();
    for path in &paths {
        let t = Transcript::read_from(path)?;
        let label = t.start()?.agent_label;
        let summary =
            summarize_transcript(&t).with_context(|| format!("summarizing {}", path.display()))?;
        by_policy.entry(label).or_default().push(summary);
    }
    let rows: Vec<MetricsRow> = by_policy
        .into_iter()
        .map(|(label, mut s)| {
            s.sort_by_key(|x| x.seed);
            MetricsRow::from_summaries(&label, &s)
        })
        .collect();
    print!("{}", emit_table(&rows));
    if let Some(path) = csv {
        fs::write(path, emit_csv(&rows)?)?;
    }
    Ok(())
}

fn gen_scenario(seed: u64, profile: &str, out: &Path) -> Result<()> {
    let mut scenario = generate_synthetic_scenario(seed, parse_profile(profile)?)?;
    if let Some(name) = out.file_name().and_then(|n| n.to_str()) {
        scenario.id = name.to_string();
    }
    save_scenario(&scenario, out)?;
    eprintln!(
        "wrote scenario '{}' ({} months) to {}",
        scenario.id,
        scenario.horizon,
        out.display()
    );
    Ok(())
}

fn serve(addr: SocketAddr, scenarios: &[PathBuf], transcripts: Option<PathBuf>) -> Result<()> {
    let mut catalog = ScenarioCatalog::with_default();
    for dir in scenarios {
        catalog.insert(load_scenario(dir).with_context(|| format!("loading {}", dir.display()))?);
    }
    let mut state = arena_server::AppState::new(catalog);
    if let Some(dir) = transcripts {
        fs::create_dir_all(&dir)?;
        state = state.with_transcript_dir(dir);
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        tracing::info!("listening on http://{}", listener.local_addr()?);
        arena_server::serve(listener, state).await?;
        Ok(())
    })
}

fn replay_cmd(transcript: &Path, scenario: &str) -> Result<()> {
    let text = fs::read_to_string(transcript)
        .with_context(|| format!("reading {}", transcript.display()))?;
    let replayed = replay(&text, Arc::new(load(scenario)?))?;
    println!("replay ok: {} records reproduced", replayed.len());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_specs() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(parse_seeds("2..=2").unwrap(), vec![2]);
        assert_eq!(parse_seeds("7, 1,4").unwrap(), vec![7, 1, 4]);
        assert_eq!(parse_seeds("9").unwrap(), vec![9]);
        assert!(parse_seeds("5..1").is_err());
        assert!(parse_seeds("a..3").is_err());
    }

    #[test]
    fn profile_specs() {
        assert!(parse_profile("40,30,62").is_ok());
        assert!(parse_profile("40,30").is_err());
        assert!(parse_profile("x,1,2").is_err());
    }
}
