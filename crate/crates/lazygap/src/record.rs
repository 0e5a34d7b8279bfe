//! CSV rows and run output files.

use std::cmp::Ordering;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const HEADER: [&str; 13] = [
    "experiment",
    "model",
    "regime",
    "source",
    "d",
    "N",
    "rho",
    "seed",
    "steps",
    "samples",
    "risk",
    "risk_normalized",
    "config_hash",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Theory,
    Oracle,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRecord {
    pub experiment: String,
    pub model: String,
    pub regime: String,
    pub source: Source,
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub rho: f64,
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub samples: Option<u64>,
    pub risk: f64,
    pub risk_normalized: f64,
    pub config_hash: String,
}

impl RiskRecord {
    fn sort_key_cmp(&self, other: &Self) -> Ordering {
        self.regime
            .cmp(&other.regime)
            .then(self.rho.total_cmp(&other.rho))
            .then(self.seed.cmp(&other.seed))
            .then(self.source.cmp(&other.source))
            .then(self.steps.cmp(&other.steps))
    }
}

/// Orders rows by `(regime, rho, seed)` so output does not depend on
/// scheduling.
pub fn sort_records(rows: &mut [RiskRecord]) {
    rows.sort_by(RiskRecord::sort_key_cmp);
}

/// Theory versus averaged oracle value for one `(regime, rho)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub experiment: String,
    pub model: String,
    pub regime: String,
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub rho: f64,
    pub theory: f64,
    pub oracle: f64,
    pub abs_diff: f64,
}

/// One enumerated critical point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeRow {
    pub subset: String,
    pub size: usize,
    pub gradient_norm: f64,
    pub risk: f64,
    pub global: bool,
    pub certificate: Option<f64>,
    pub case: Option<String>,
    pub bound: f64,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Companion {
    None,
    Diagnostics(Vec<DiagnosticRow>),
    Landscape(Vec<LandscapeRow>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<RiskRecord>,
    pub companion: Companion,
    pub metadata: serde_json::Value,
}

pub fn write_records<W: Write>(out: W, rows: &[RiskRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| HarnessError::Io { path: "<csv>".into(), source })?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<RiskRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != HEADER {
        return Err(HarnessError::config(path.display().to_string(), format!("unexpected header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(HarnessError::from)).collect()
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| HarnessError::Io { path: path.display().to_string(), source })?;
    Ok(())
}

/// `<out>.diagnostics.csv` or `<out>.landscape.csv`, and `<out>.json`.
pub fn companion_paths(out: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let with = |suffix: &str| {
        let mut s = out.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    (with(".diagnostics.csv"), with(".landscape.csv"), with(".json"))
}

/// Writes the data CSV plus its companion files.
pub fn write_output(out: &Path, run: &RunOutput) -> Result<()> {
    let io = |source| HarnessError::Io { path: out.display().to_string(), source };
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    write_records(File::create(out).map_err(io)?, &run.records)?;
    let (diag, land, meta) = companion_paths(out);
    match &run.companion {
        Companion::None => {}
        Companion::Diagnostics(rows) => write_rows(&diag, rows)?,
        Companion::Landscape(rows) => write_rows(&land, rows)?,
    }
    let text = serde_json::to_string_pretty(&run.metadata)?;
    std::fs::write(&meta, text + "\n").map_err(|source| HarnessError::Io { path: meta.display().to_string(), source })?;
    Ok(())
}
