//! Report, manifest, and CSV emission.
//!
//! Everything written here is byte-deterministic for a fixed config digest;
//! the only timestamp lives in the run manifest.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use fedshot_core::eval::{CellBlock, DeltaTable, ThresholdTable};
use fedshot_core::federation::RunReport;

use crate::error::CliError;

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    }
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

pub fn read_report(path: &Path) -> Result<RunReport, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

/// Provenance record for one command invocation.
#[derive(Debug, serde::Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub artifact_version: String,
    pub timestamp_unix: u64,
    pub seeds: Vec<u64>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config_digest: &str, seeds: &[u64]) -> Self {
        Self {
            command: command.to_string(),
            config_digest: config_digest.to_string(),
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            seeds: seeds.to_vec(),
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf, CliError> {
        let path = out_dir.join(format!("manifest-{}.json", self.command));
        write_json(&path, self)?;
        Ok(path)
    }
}

/// One row of the combined summary CSV.
pub struct SummaryRow {
    pub mode: String,
    pub strategy: String,
    pub shot: Option<u32>,
    pub client: String,
    pub mean_f1: f64,
    pub std_f1: f64,
}

pub fn summary_rows(mode: &str, report: &RunReport) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = report
        .per_client
        .iter()
        .map(|(client, summary)| SummaryRow {
            mode: mode.to_string(),
            strategy: report.strategy.clone(),
            shot: report.shot_count,
            client: client.clone(),
            mean_f1: summary.mean_f1,
            std_f1: summary.std_f1,
        })
        .collect();
    if let (Some(per_seed), Some(mean)) = (&report.server.per_seed_f1, report.server.mean_f1) {
        let std = fedshot_core::eval::mean_std(per_seed)
            .map(|(_, s)| s)
            .unwrap_or(0.0);
        rows.push(SummaryRow {
            mode: mode.to_string(),
            strategy: report.strategy.clone(),
            shot: report.shot_count,
            client: "server".to_string(),
            mean_f1: mean,
            std_f1: std,
        });
    }
    rows
}

fn shot_str(shot: Option<u32>) -> String {
    shot.map(|s| s.to_string())
        .unwrap_or_else(|| "-".to_string())
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<(), CliError> {
    let mut out = String::from("mode,strategy,shot,client,mean_f1,std_f1\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.6},{:.6}\n",
            row.mode,
            row.strategy,
            shot_str(row.shot),
            row.client,
            row.mean_f1,
            row.std_f1
        ));
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    }
    std::fs::write(path, out).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

pub fn write_delta_csv(path: &Path, tables: &[DeltaTable]) -> Result<(), CliError> {
    let mut out =
        String::from("client,shot,baseline,fl_mean_f1,baseline_mean_f1,delta,improvement\n");
    for table in tables {
        for entry in &table.entries {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6},{:.6},{}\n",
                entry.client,
                shot_str(entry.shot_count),
                entry.baseline,
                entry.fl_mean_f1,
                entry.baseline_mean_f1,
                entry.delta,
                entry.improvement
            ));
        }
    }
    std::fs::write(path, out).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

/// Mean and population-std pair, absent when a setting lacks that shot.
pub type SeriesCell = Option<(f64, f64)>;

/// Per-client series: one row per shot count, one mean/std column pair per
/// setting, suitable for external plotting.
pub struct SeriesTable {
    pub client: String,
    pub settings: Vec<String>,
    /// `(shot, values per setting)`; a `None` cell means the setting has no
    /// report for that shot.
    pub rows: Vec<(u32, Vec<SeriesCell>)>,
}

pub fn write_series_csv(path: &Path, table: &SeriesTable) -> Result<(), CliError> {
    let mut header = String::from("shot");
    for setting in &table.settings {
        header.push_str(&format!(",{setting}_mean_f1,{setting}_std_f1"));
    }
    header.push('\n');
    let mut out = header;
    for (shot, cells) in &table.rows {
        out.push_str(&shot.to_string());
        for cell in cells {
            match cell {
                Some((mean, std)) => out.push_str(&format!(",{mean:.6},{std:.6}")),
                None => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

/// Threshold table serialized with presentation rounding applied.
#[derive(Debug, serde::Serialize, serde::Deserialize, PartialEq)]
pub struct ThresholdTableFile {
    pub gold: CellBlock,
    pub per_threshold: Vec<(f64, CellBlock)>,
}

impl ThresholdTableFile {
    pub fn rounded_from(table: &ThresholdTable) -> Self {
        Self {
            gold: table.gold.rounded2(),
            per_threshold: table
                .per_threshold
                .iter()
                .map(|(t, block)| (*t, block.rounded2()))
                .collect(),
        }
    }
}
