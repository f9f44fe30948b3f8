use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

use super::chain::MetricsRecord;

pub const REPORT_SCHEMA: &str = "unlearn-report/1";
pub const RECORDS_FILE: &str = "records.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub min: f64,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
    pub mean: f64,
}

impl Percentiles {
    /// Nearest-rank percentiles; `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let rank = |q: f64| v[((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        Some(Percentiles {
            min: v[0],
            p50: rank(0.5),
            p90: rank(0.9),
            p99: rank(0.99),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: String,
    pub records: usize,
    pub trials: usize,
    /// Number of distinct round indices.
    pub rounds: usize,
    pub excess_risk: Option<Percentiles>,
    pub max_drift: Option<f64>,
    pub max_gap: Option<f64>,
    /// Point-gradient computations summed over all trials.
    pub total_budget: u64,
}

impl Summary {
    pub fn of(records: &[MetricsRecord]) -> Self {
        let max = |it: &mut dyn Iterator<Item = f64>| it.fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
        let mut trials: Vec<usize> = records.iter().map(|r| r.trial).collect();
        trials.sort_unstable();
        trials.dedup();
        let excess: Vec<f64> = records.iter().map(|r| r.excess_risk).collect();
        Summary {
            schema: REPORT_SCHEMA.to_string(),
            records: records.len(),
            trials: trials.len(),
            rounds: records.iter().map(|r| r.round + 1).max().unwrap_or(0),
            excess_risk: Percentiles::of(&excess),
            max_drift: max(&mut records.iter().map(|r| r.drift)),
            max_gap: max(&mut records.iter().filter_map(|r| r.gap)),
            total_budget: records.iter().map(|r| r.gradients).sum(),
        }
    }
}

/// Writes `records.jsonl` and `summary.json` into `dir`.
pub fn emit_report(records: &[MetricsRecord], dir: &Path) -> Result<Summary> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(RECORDS_FILE);
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let summary = Summary::of(records);
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<MetricsRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
