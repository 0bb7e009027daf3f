//! Per-policy aggregates in the layout of the results table.
//!
//! Money columns are means in millions. Action shares are pooled over every
//! action of every episode; FR% pools successes over attempts and is empty
//! when nothing was attempted.

use arena_core::engine::ActionResolution;
use arena_core::fundraising::Instrument;
use arena_core::transcript::{ActionRecord, EnvFeedback, MonthlySnapshot};
use arena_core::{EngineError, EpisodeSummary, Money, RecordKind, TerminalSummary, Transcript};
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub policy: String,
    pub episodes: usize,
    pub score_mean: f64,
    pub score_std: f64,
    pub survival_pct: f64,
    pub months_mean: f64,
    pub months_std: f64,
    pub equity_raised: f64,
    pub debt_raised: f64,
    pub total_raised: f64,
    pub fr_success_pct: Option<f64>,
    pub peak_cash: f64,
    pub end_cash: f64,
    pub low_cash: f64,
    pub tools_per_month: f64,
    pub fr_attempt_pct: f64,
    pub fr_success_share: f64,
    pub bookclose_pct: f64,
    pub pass_count: f64,
    pub pass_pct: f64,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Sample standard deviation; zero for fewer than two values.
fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn mean_millions(rows: &[EpisodeSummary], f: impl Fn(&EpisodeSummary) -> Money) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let total: i128 = rows.iter().map(|r| i128::from(f(r).cents())).sum();
    total as f64 / rows.len() as f64 / 1e8
}

fn pct(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

impl MetricsRow {
    pub fn from_summaries(policy: &str, rows: &[EpisodeSummary]) -> MetricsRow {
        let scores: Vec<f64> = rows.iter().map(|r| r.score.to_millions()).collect();
        let months: Vec<f64> = rows.iter().map(|r| f64::from(r.months_lived)).collect();
        let sum = |f: fn(&EpisodeSummary) -> u64| rows.iter().map(f).sum::<u64>();
        let actions = sum(|r| u64::from(r.actions()));
        let attempts = sum(|r| u64::from(r.fr_attempts));
        let successes = sum(|r| u64::from(r.fr_successes));
        let closings = sum(|r| u64::from(r.book_closings));
        let passes = sum(|r| u64::from(r.passes));
        let tools = sum(|r| r.n_tools);
        let equity = mean_millions(rows, |r| r.equity_raised);
        let debt = mean_millions(rows, |r| r.debt_raised);
        MetricsRow {
            policy: policy.to_string(),
            episodes: rows.len(),
            score_mean: mean(&scores),
            score_std: std_dev(&scores),
            survival_pct: pct(
                rows.iter().filter(|r| r.survived).count() as u64,
                rows.len() as u64,
            ),
            months_mean: mean(&months),
            months_std: std_dev(&months),
            equity_raised: equity,
            debt_raised: debt,
            total_raised: mean_millions(rows, |r| r.equity_raised + r.debt_raised),
            fr_success_pct: (attempts > 0).then(|| pct(successes, attempts)),
            peak_cash: mean_millions(rows, |r| r.peak_cash),
            end_cash: mean_millions(rows, |r| r.end_cash),
            low_cash: mean_millions(rows, |r| r.low_cash),
            tools_per_month: if actions == 0 {
                0.0
            } else {
                tools as f64 / actions as f64
            },
            fr_attempt_pct: pct(attempts, actions),
            fr_success_share: pct(successes, actions),
            bookclose_pct: pct(closings, actions),
            pass_count: if rows.is_empty() {
                0.0
            } else {
                passes as f64 / rows.len() as f64
            },
            pass_pct: pct(passes, actions),
        }
    }
}

/// Rebuilds an episode's summary from its transcript alone.
pub fn summarize_transcript(transcript: &Transcript) -> Result<EpisodeSummary, EngineError> {
    let start = transcript.start()?;
    let mut s = EpisodeSummary {
        seed: start.seed,
        peak_cash: start.initial_cash,
        low_cash: start.initial_cash,
        end_cash: start.initial_cash,
        ..EpisodeSummary::default()
    };
    for record in transcript.records() {
        match record.kind {
            RecordKind::MonthlySnapshot => {
                let snap: MonthlySnapshot = record.payload_as()?;
                s.peak_cash = s.peak_cash.max(snap.cash);
                s.low_cash = s.low_cash.min(snap.cash);
                s.end_cash = snap.cash;
            }
            RecordKind::EnvFeedback => {
                let fb: EnvFeedback = record.payload_as()?;
                for arrival in fb.settlements {
                    match arrival.instrument {
                        Instrument::Equity => s.equity_raised += arrival.amount,
                        Instrument::Debt => s.debt_raised += arrival.amount,
                    }
                }
            }
            RecordKind::Action => {
                let action: ActionRecord = record.payload_as()?;
                match action.resolution {
                    ActionResolution::Pass => s.passes += 1,
                    ActionResolution::BookClosing(_) => s.book_closings += 1,
                    ActionResolution::FundRaisingRequest(o) => {
                        s.fr_attempts += 1;
                        s.fr_successes += u32::from(o.success);
                    }
                }
            }
            RecordKind::Terminal => {
                let terminal: TerminalSummary = record.payload_as()?;
                s.survived = terminal.survived;
                s.months_lived = terminal.months_lived;
                s.score = terminal.score;
                s.n_tools = terminal.n_tools;
            }
            _ => {}
        }
    }
    if transcript.terminal().is_none() {
        return Err(EngineError::InvalidRequest(format!(
            "episode with seed {} has no terminal record",
            s.seed
        )));
    }
    Ok(s)
}

const HEADERS: [&str; 18] = [
    "Policy",
    "Score ($M)",
    "Surv%",
    "Mon.",
    "Equity",
    "Debt",
    "Total",
    "FR%",
    "Peak",
    "End",
    "Low",
    "T/Mo",
    "FR.A%",
    "FR.S%",
    "BC%",
    "Pass#",
    "Pass%",
    "N",
];

fn cells(r: &MetricsRow) -> Vec<String> {
    vec![
        r.policy.clone(),
        format!("{:.2}±{:.2}", r.score_mean, r.score_std),
        format!("{:.1}", r.survival_pct),
        format!("{:.1}±{:.1}", r.months_mean, r.months_std),
        format!("{:.2}", r.equity_raised),
        format!("{:.2}", r.debt_raised),
        format!("{:.2}", r.total_raised),
        r.fr_success_pct
            .map_or_else(|| "--".to_string(), |v| format!("{v:.1}")),
        format!("{:.2}", r.peak_cash),
        format!("{:.2}", r.end_cash),
        format!("{:.2}", r.low_cash),
        format!("{:.2}", r.tools_per_month),
        format!("{:.1}", r.fr_attempt_pct),
        format!("{:.1}", r.fr_success_share),
        format!("{:.1}", r.bookclose_pct),
        format!("{:.1}", r.pass_count),
        format!("{:.1}", r.pass_pct),
        r.episodes.to_string(),
    ]
}

/// Fixed-width text table.
pub fn emit_table(rows: &[MetricsRow]) -> String {
    let body: Vec<Vec<String>> = rows.iter().map(cells).collect();
    let widths: Vec<usize> = (0..HEADERS.len())
        .map(|i| {
            body.iter()
                .map(|r| r[i].chars().count())
                .chain([HEADERS[i].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cols: Vec<&str>| {
        cols.iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = line(HEADERS.to_vec());
    out.push('\n');
    for r in &body {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

/// Machine-readable table, one row per policy, full precision.
pub fn emit_csv(rows: &[MetricsRow]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
