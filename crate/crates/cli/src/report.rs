//! Check verdicts and the JSON/CSV artifacts of a run.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// an analytic bound checked outside the regime where it is claimed
    Flagged,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: String,
}

impl Check {
    pub fn new(
        name: &str,
        pass: bool,
        value: Option<f64>,
        threshold: Option<f64>,
        detail: impl Into<String>,
    ) -> Self {
        let status = if pass { Status::Pass } else { Status::Fail };
        Check {
            name: name.into(),
            status,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    /// Value must not exceed the threshold.
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Check::new(name, value <= threshold, Some(value), Some(threshold), "")
    }

    pub fn skipped(name: &str, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            status: Status::Skipped,
            value: None,
            threshold: None,
            detail: detail.into(),
        }
    }

    /// A failed analytic-bound check becomes `Flagged` when the model is
    /// outside the bound's regime.
    pub fn regime(mut self, outside: bool) -> Self {
        if outside && self.status == Status::Fail {
            self.status = Status::Flagged;
        }
        self
    }
}

/// Whether the check set fails the run.
pub fn failed(checks: &[Check], strict_regime: bool) -> bool {
    checks
        .iter()
        .any(|c| c.status == Status::Fail || (strict_regime && c.status == Status::Flagged))
}

/// A table written as CSV.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Everything an experiment produced.
#[derive(Debug)]
pub struct Outcome {
    pub record: Value,
    pub checks: Vec<Check>,
    pub table: Option<Table>,
}

#[derive(Serialize)]
struct Envelope<'a> {
    record: &'a Value,
    meta: Meta,
}

#[derive(Serialize)]
struct Meta {
    /// seconds since the Unix epoch
    timestamp: u64,
    elapsed_s: f64,
}

/// Destinations for one run's artifacts.
pub struct Sinks {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

impl Sinks {
    pub fn new(
        out: Option<&Path>,
        json: Option<PathBuf>,
        csv: Option<PathBuf>,
        stem: &str,
    ) -> Self {
        let json = json.or_else(|| out.map(|d| d.join(format!("{stem}.json"))));
        let csv = csv.or_else(|| out.map(|d| d.join(format!("{stem}.csv"))));
        Sinks { json, csv }
    }

    pub fn write(&self, outcome: &Outcome, elapsed_s: f64) -> Result<()> {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let env = Envelope {
            record: &outcome.record,
            meta: Meta {
                timestamp,
                elapsed_s,
            },
        };
        let text = serde_json::to_string_pretty(&env)?;
        match &self.json {
            Some(path) => write_file(path, text.as_bytes())?,
            None => println!("{text}"),
        }
        if let (Some(table), Some(path)) = (&outcome.table, &self.csv) {
            ensure_parent(path)?;
            let mut w = csv::Writer::from_path(path)
                .with_context(|| format!("cannot write {}", path.display()))?;
            w.write_record(&table.header)?;
            for row in &table.rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        Ok(())
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .with_context(|| format!("cannot create {}", parent.display()))?;
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    ensure_parent(path)?;
    let mut f =
        fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    f.write_all(bytes)?;
    f.write_all(b"\n")?;
    Ok(())
}
