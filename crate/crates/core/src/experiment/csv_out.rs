//! Results files.
//!
//! Columns: `task, seed, step, metric, value, ci_low, ci_high`. Per-seed
//! rows leave the interval empty; summary rows leave `seed` empty and put
//! the mean in `value`. Lines starting with `#` come first and carry the
//! resolved configuration of every run as JSON, so a file is
//! self-describing.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::aggregate::SummaryRow;
use super::runner::RunRecord;
use crate::error::Result;

pub const COLUMNS: [&str; 7] = ["task", "seed", "step", "metric", "value", "ci_low", "ci_high"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub task: String,
    pub seed: Option<u64>,
    pub step: u64,
    pub metric: String,
    pub value: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

#[derive(Serialize)]
struct RunHeader<'a> {
    seed: u64,
    status: &'a super::runner::RunStatus,
    resolved_k: &'a [u32],
    parameter_count: usize,
    wall_clock_secs: f64,
    config: &'a super::config::ExperimentConfig,
}

pub fn record_rows(records: &[RunRecord]) -> Vec<CsvRow> {
    records
        .iter()
        .flat_map(|r| {
            r.metrics.iter().map(|m| CsvRow {
                task: r.task.clone(),
                seed: Some(r.seed),
                step: m.step,
                metric: m.metric.clone(),
                value: m.value,
                ci_low: None,
                ci_high: None,
            })
        })
        .collect()
}

pub fn summary_rows(summary: &[SummaryRow]) -> Vec<CsvRow> {
    summary
        .iter()
        .map(|s| CsvRow {
            task: s.task.clone(),
            seed: None,
            step: s.step,
            metric: s.metric.clone(),
            value: s.mean,
            ci_low: Some(s.ci_low),
            ci_high: Some(s.ci_high),
        })
        .collect()
}

/// Writes `# run` comment lines for `records`, then the header and `rows`.
pub fn write_results<W: Write>(mut writer: W, records: &[RunRecord], rows: &[CsvRow]) -> Result<()> {
    for r in records {
        let header = RunHeader {
            seed: r.seed,
            status: &r.status,
            resolved_k: &r.resolved_k,
            parameter_count: r.parameter_count,
            wall_clock_secs: r.wall_clock_secs,
            config: &r.config,
        };
        writeln!(writer, "# run {}", serde_json::to_string(&header)?)?;
    }
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    out.write_record(COLUMNS)?;
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

/// Per-seed rows followed by summary rows (when there are at least two
/// records) in one file.
pub fn export_csv(path: &Path, records: &[RunRecord], summary: Option<&[SummaryRow]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut rows = record_rows(records);
    if let Some(s) = summary {
        rows.extend(summary_rows(s));
    }
    write_results(File::create(path)?, records, &rows)
}

pub fn read_results(path: &Path) -> Result<Vec<CsvRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(BufReader::new(File::open(path)?));
    reader.deserialize().map(|r| r.map_err(Into::into)).collect()
}

/// The JSON payloads of the `# run` lines.
pub fn read_run_headers(path: &Path) -> Result<Vec<serde_json::Value>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        match line.strip_prefix("# run ") {
            Some(json) => out.push(serde_json::from_str(json)?),
            None if line.starts_with('#') => {}
            None => break,
        }
    }
    Ok(out)
}
