//! CSV outputs.
//!
//! * `results_raw.csv`: one row per cell, fully determined by the config.
//! * `results_timing.csv`: wall-clock seconds per cell. Kept apart so the
//!   raw file stays byte-identical across repeated runs.
//! * `results_summary.csv`: per (architecture, sweep value) mean accuracy,
//!   population variance over realizations, and that variance divided by 4
//!   for error bars. Always recomputable from the raw file alone.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiment::CellResult;

pub const RAW_FILE: &str = "results_raw.csv";
pub const TIMING_FILE: &str = "results_timing.csv";
pub const SUMMARY_FILE: &str = "results_summary.csv";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no results to report")]
    Empty,
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub realization: usize,
    pub architecture: String,
    pub label: String,
    pub sweep_param: Option<String>,
    pub sweep_value: Option<f64>,
    pub accuracy: f64,
    pub conv_params: usize,
    pub total_params: usize,
    pub graph_seed: u64,
    pub train_seed: u64,
    pub first_epoch_loss: f64,
    pub final_epoch_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub realization: usize,
    pub architecture: String,
    pub sweep_value: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub architecture: String,
    pub label: String,
    pub sweep_param: Option<String>,
    pub sweep_value: Option<f64>,
    pub realizations: usize,
    pub mean_accuracy: f64,
    pub variance: f64,
    pub variance_over_4: f64,
    pub conv_params: usize,
}

impl From<&CellResult> for RawRow {
    fn from(c: &CellResult) -> Self {
        Self {
            realization: c.realization,
            architecture: c.architecture.tag().to_string(),
            label: c.architecture.label().to_string(),
            sweep_param: c.sweep_param.map(|p| p.key().to_string()),
            sweep_value: c.sweep_value,
            accuracy: c.accuracy,
            conv_params: c.conv_params,
            total_params: c.total_params,
            graph_seed: c.graph_seed,
            train_seed: c.train_seed,
            first_epoch_loss: c.first_epoch_loss,
            final_epoch_loss: c.final_epoch_loss,
        }
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ReportError + '_ {
    move |source| ReportError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<Vec<RawRow>, ReportError> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize()
        .collect::<Result<Vec<RawRow>, _>>()
        .map_err(csv_err(path))
}

/// Groups rows by (architecture, sweep value) in order of first appearance.
pub fn summarize(rows: &[RawRow]) -> Result<Vec<SummaryRow>, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut groups: Vec<(&RawRow, Vec<f64>)> = Vec::new();
    for row in rows {
        let same = |g: &&RawRow| {
            g.architecture == row.architecture
                && g.sweep_param == row.sweep_param
                && g.sweep_value.map(f64::to_bits) == row.sweep_value.map(f64::to_bits)
        };
        match groups.iter_mut().find(|(g, _)| same(g)) {
            Some((_, accs)) => accs.push(row.accuracy),
            None => groups.push((row, vec![row.accuracy])),
        }
    }
    Ok(groups
        .into_iter()
        .map(|(first, accs)| {
            let n = accs.len() as f64;
            let mean = accs.iter().sum::<f64>() / n;
            let variance = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
            SummaryRow {
                architecture: first.architecture.clone(),
                label: first.label.clone(),
                sweep_param: first.sweep_param.clone(),
                sweep_value: first.sweep_value,
                realizations: accs.len(),
                mean_accuracy: mean,
                variance,
                variance_over_4: variance / 4.0,
                conv_params: first.conv_params,
            }
        })
        .collect())
}

/// Paths of the files one report writes.
#[derive(Debug, Clone)]
pub struct ReportPaths {
    pub raw: PathBuf,
    pub timing: PathBuf,
    pub summary: PathBuf,
}

impl ReportPaths {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            raw: dir.join(RAW_FILE),
            timing: dir.join(TIMING_FILE),
            summary: dir.join(SUMMARY_FILE),
        }
    }
}

/// Writes the raw, timing and summary files into `dir`. Nothing is
/// written when `results` is empty.
pub fn report(results: &[CellResult], dir: impl AsRef<Path>) -> Result<ReportPaths, ReportError> {
    if results.is_empty() {
        return Err(ReportError::Empty);
    }
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let raw: Vec<RawRow> = results.iter().map(RawRow::from).collect();
    let summary = summarize(&raw)?;
    let timing: Vec<TimingRow> = results
        .iter()
        .map(|c| TimingRow {
            realization: c.realization,
            architecture: c.architecture.tag().to_string(),
            sweep_value: c.sweep_value,
            wall_seconds: c.wall_seconds,
        })
        .collect();
    let paths = ReportPaths::in_dir(dir);
    write_rows(&paths.raw, &raw)?;
    write_rows(&paths.timing, &timing)?;
    write_rows(&paths.summary, &summary)?;
    Ok(paths)
}

/// Recomputes `results_summary.csv` next to an existing raw file.
pub fn report_from_raw(raw_path: impl AsRef<Path>) -> Result<PathBuf, ReportError> {
    let raw_path = raw_path.as_ref();
    let rows = read_raw(raw_path)?;
    let summary = summarize(&rows)?;
    let out = raw_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(SUMMARY_FILE);
    write_rows(&out, &summary)?;
    Ok(out)
}

pub fn write_summary(path: impl AsRef<Path>, rows: &[SummaryRow]) -> Result<(), ReportError> {
    write_rows(path.as_ref(), rows)
}
