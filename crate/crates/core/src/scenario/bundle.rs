//! Scenario bundles on disk.
//!
//! A bundle is a directory holding `macro.csv`, `industry.csv`,
//! `company.json` and `rules.json`, plus an optional `regimes.csv`
//! (`month_index,regime`). The scenario id is the directory name. CSV
//! numbers are plain decimals with a dot separator; values are written with
//! the shortest representation that parses back to the identical `f64`.

use std::fs;
use std::path::Path;

use super::{
    validate_scenario, CompanyConfig, IndustrySnapshot, MacroSnapshot, Regime, RuleConfig, Scenario,
};
use crate::error::ScenarioError;

pub const MACRO_HEADER: [&str; 14] = [
    "month_index",
    "gdp_growth",
    "cpi",
    "unemployment",
    "fed_funds",
    "sofr",
    "tsy2y",
    "tsy5y",
    "tsy10y",
    "tsy30y",
    "baa_oas",
    "vix",
    "pe_ratio",
    "ps_ratio",
];

pub const INDUSTRY_HEADER: [&str; 4] = [
    "month_index",
    "user_growth",
    "gross_margin",
    "ebitda_margin",
];

const REGIME_HEADER: [&str; 2] = ["month_index", "regime"];

pub fn load_scenario(dir: &Path) -> Result<Scenario, ScenarioError> {
    let id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .filter(|n| !n.is_empty())
        .unwrap_or("scenario")
        .to_string();

    let macro_rows = read_table(dir, "macro.csv", &MACRO_HEADER)?;
    let industry_rows = read_table(dir, "industry.csv", &INDUSTRY_HEADER)?;

    let macro_series = dense_series(&macro_rows, "macro.csv", |r| {
        Ok(MacroSnapshot {
            month_index: r.0,
            gdp_growth: num(r, 1, "macro.csv")?,
            cpi: num(r, 2, "macro.csv")?,
            unemployment: num(r, 3, "macro.csv")?,
            fed_funds: num(r, 4, "macro.csv")?,
            sofr: num(r, 5, "macro.csv")?,
            tsy2y: num(r, 6, "macro.csv")?,
            tsy5y: num(r, 7, "macro.csv")?,
            tsy10y: num(r, 8, "macro.csv")?,
            tsy30y: num(r, 9, "macro.csv")?,
            baa_oas: num(r, 10, "macro.csv")?,
            vix: num(r, 11, "macro.csv")?,
            pe_ratio: num(r, 12, "macro.csv")?,
            ps_ratio: num(r, 13, "macro.csv")?,
        })
    })?;
    let horizon = macro_series.len() as u32;

    let industry_series = dense_series(&industry_rows, "industry.csv", |r| {
        Ok(IndustrySnapshot {
            month_index: r.0,
            user_growth: num(r, 1, "industry.csv")?,
            gross_margin: num(r, 2, "industry.csv")?,
            ebitda_margin: num(r, 3, "industry.csv")?,
        })
    })?;
    if industry_series.len() as u32 != horizon {
        let month = (industry_series.len() as u32).min(horizon);
        return Err(ScenarioError::MissingSeries {
            file: if (industry_series.len() as u32) < horizon {
                "industry.csv"
            } else {
                "macro.csv"
            }
            .into(),
            month,
        });
    }

    let regime_labels = if dir.join("regimes.csv").exists() {
        let rows = read_table(dir, "regimes.csv", &REGIME_HEADER)?;
        let labels = dense_series(&rows, "regimes.csv", |r| {
            Regime::parse(r.1[1].trim()).ok_or_else(|| ScenarioError::Schema {
                file: "regimes.csv".into(),
                detail: format!("month {}: unknown regime '{}'", r.0, &r.1[1]),
            })
        })?;
        if labels.len() as u32 != horizon {
            return Err(ScenarioError::MissingSeries {
                file: "regimes.csv".into(),
                month: (labels.len() as u32).min(horizon),
            });
        }
        labels
    } else {
        vec![Regime::Neutral; horizon as usize]
    };

    let initial_company: CompanyConfig = read_json(dir, "company.json")?;
    let rules: RuleConfig = read_json(dir, "rules.json")?;

    let scenario = Scenario {
        id,
        horizon,
        macro_series,
        industry_series,
        initial_company,
        rules,
        regime_labels,
    };
    let report = validate_scenario(&scenario);
    if !report.is_empty() {
        return Err(ScenarioError::InvariantViolation(report));
    }
    Ok(scenario)
}

/// Writes `scenario` as a bundle into `dir`, creating it if needed.
pub fn save_scenario(scenario: &Scenario, dir: &Path) -> Result<(), ScenarioError> {
    fs::create_dir_all(dir).map_err(|source| io_err(dir, source))?;

    let mut rows = Vec::with_capacity(scenario.macro_series.len());
    for m in &scenario.macro_series {
        rows.push(vec![
            m.month_index.to_string(),
            fmt_num(m.gdp_growth),
            fmt_num(m.cpi),
            fmt_num(m.unemployment),
            fmt_num(m.fed_funds),
            fmt_num(m.sofr),
            fmt_num(m.tsy2y),
            fmt_num(m.tsy5y),
            fmt_num(m.tsy10y),
            fmt_num(m.tsy30y),
            fmt_num(m.baa_oas),
            fmt_num(m.vix),
            fmt_num(m.pe_ratio),
            fmt_num(m.ps_ratio),
        ]);
    }
    write_table(dir, "macro.csv", &MACRO_HEADER, &rows)?;

    let rows: Vec<Vec<String>> = scenario
        .industry_series
        .iter()
        .map(|s| {
            vec![
                s.month_index.to_string(),
                fmt_num(s.user_growth),
                fmt_num(s.gross_margin),
                fmt_num(s.ebitda_margin),
            ]
        })
        .collect();
    write_table(dir, "industry.csv", &INDUSTRY_HEADER, &rows)?;

    let rows: Vec<Vec<String>> = scenario
        .regime_labels
        .iter()
        .enumerate()
        .map(|(i, r)| vec![i.to_string(), r.as_str().to_string()])
        .collect();
    write_table(dir, "regimes.csv", &REGIME_HEADER, &rows)?;

    write_json(dir, "company.json", &scenario.initial_company)?;
    write_json(dir, "rules.json", &scenario.rules)?;
    Ok(())
}

type Row = (u32, csv::StringRecord);

fn read_table(dir: &Path, file: &str, header: &[&str]) -> Result<Vec<Row>, ScenarioError> {
    let path = dir.join(file);
    let text = fs::read_to_string(&path).map_err(|source| io_err(&path, source))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let found = reader
        .headers()
        .map_err(|e| schema(file, e.to_string()))?
        .clone();
    let found: Vec<&str> = found.iter().collect();
    if found != header {
        return Err(schema(
            file,
            format!(
                "header must be exactly '{}', found '{}'",
                header.join(","),
                found.join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| schema(file, e.to_string()))?;
        let month: u32 = record[0]
            .trim()
            .parse()
            .map_err(|_| schema(file, format!("bad month_index '{}'", &record[0])))?;
        rows.push((month, record));
    }
    rows.sort_by_key(|r| r.0);
    Ok(rows)
}

fn dense_series<T>(
    rows: &[Row],
    file: &str,
    mut parse: impl FnMut(&Row) -> Result<T, ScenarioError>,
) -> Result<Vec<T>, ScenarioError> {
    let mut out = Vec::with_capacity(rows.len());
    for (expected, row) in rows.iter().enumerate() {
        let expected = expected as u32;
        if row.0 > expected {
            return Err(ScenarioError::MissingSeries {
                file: file.into(),
                month: expected,
            });
        }
        if row.0 < expected {
            return Err(schema(file, format!("duplicate month_index {}", row.0)));
        }
        out.push(parse(row)?);
    }
    if out.is_empty() {
        return Err(ScenarioError::MissingSeries {
            file: file.into(),
            month: 0,
        });
    }
    Ok(out)
}

fn num(row: &Row, col: usize, file: &str) -> Result<f64, ScenarioError> {
    let raw = row.1[col].trim();
    let ok = !raw.is_empty()
        && raw
            .chars()
            .all(|c| c.is_ascii_digit() || c == '.' || c == '-' || c == '+');
    match raw.parse::<f64>() {
        Ok(v) if ok => Ok(v),
        _ => Err(schema(
            file,
            format!(
                "month {}: column {col} is not a decimal number: '{raw}'",
                row.0
            ),
        )),
    }
}

fn fmt_num(v: f64) -> String {
    // `Display` for f64 never uses exponent notation and round-trips exactly.
    let s = format!("{v}");
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn write_table(
    dir: &Path,
    file: &str,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), ScenarioError> {
    let path = dir.join(file);
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let to_schema = |e: csv::Error| schema(file, e.to_string());
    w.write_record(header).map_err(to_schema)?;
    for row in rows {
        w.write_record(row).map_err(to_schema)?;
    }
    let bytes = w.into_inner().map_err(|e| schema(file, e.to_string()))?;
    fs::write(&path, bytes).map_err(|source| io_err(&path, source))
}

fn read_json<T: serde::de::DeserializeOwned>(dir: &Path, file: &str) -> Result<T, ScenarioError> {
    let path = dir.join(file);
    let text = fs::read_to_string(&path).map_err(|source| io_err(&path, source))?;
    serde_json::from_str(&text).map_err(|e| schema(file, e.to_string()))
}

fn write_json<T: serde::Serialize>(dir: &Path, file: &str, value: &T) -> Result<(), ScenarioError> {
    let path = dir.join(file);
    let mut text = serde_json::to_string_pretty(value).map_err(|e| schema(file, e.to_string()))?;
    text.push('\n');
    fs::write(&path, text).map_err(|source| io_err(&path, source))
}

fn schema(file: &str, detail: String) -> ScenarioError {
    ScenarioError::Schema {
        file: file.into(),
        detail,
    }
}

fn io_err(path: &Path, source: std::io::Error) -> ScenarioError {
    ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    }
}
