//! Per-run metrics: CSV persistence and moving-average smoothing.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;

pub const DQN_HEADER: [&str; 4] = ["episode", "reward", "epsilon", "mean_loss"];
pub const A3C_HEADER: [&str; 3] = ["global_episode", "worker", "reward"];

/// Trailing-window statistics, one point per input point.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoothed {
    pub mean: Vec<f64>,
    /// Sample standard deviation; 0 where the window holds one point.
    pub std: Vec<f64>,
}

/// Trailing mean and sample standard deviation; the first `window - 1`
/// points use whatever prefix is available.
pub fn moving_average(series: &[f64], window: usize) -> Result<Smoothed> {
    if window == 0 {
        return Err(Error::Config("moving-average window must be at least 1".into()));
    }
    let mut mean = Vec::with_capacity(series.len());
    let mut std = Vec::with_capacity(series.len());
    for i in 0..series.len() {
        let w = &series[(i + 1).saturating_sub(window)..=i];
        let n = w.len() as f64;
        let m = w.iter().sum::<f64>() / n;
        let var = if w.len() > 1 { w.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        mean.push(m);
        std.push(var.sqrt());
    }
    Ok(Smoothed { mean, std })
}

/// Row-per-episode CSV writer that flushes after every row.
pub struct CsvLog {
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvLog {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut writer = csv::Writer::from_writer(BufWriter::new(file));
        writer.write_record(header).map_err(csv_err)?;
        writer.flush()?;
        Ok(Self { writer })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        self.writer.write_record(fields).map_err(csv_err)?;
        self.writer.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// One finished (or loaded) run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub label: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Present for runs produced in-process.
    pub config: Option<ExperimentConfig>,
    pub code_version: String,
    pub duration_secs: f64,
}

impl RunRecord {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.column("reward").unwrap_or_default()
    }

    /// Reads a metrics CSV of either schema; the label is the file stem.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        if !header.iter().any(|h| h == "reward") {
            return Err(Error::Usage(format!("{}: no reward column", path.display())));
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(csv_err)?;
            let row = rec
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| Error::Usage(format!("{}: bad number {f:?}", path.display()))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(Self { label, header, rows, config: None, code_version: String::new(), duration_secs: 0.0 })
    }

    /// Writes a TOML-ish sidecar with the config echo and run facts.
    pub fn write_summary(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        writeln!(f, "# code_version = {}", self.code_version)?;
        writeln!(f, "# episodes_completed = {}", self.rows.len())?;
        writeln!(f, "# duration_secs = {:.3}", self.duration_secs)?;
        if let Some(c) = &self.config {
            f.write_all(crate::harness::config::render_config(c).as_bytes())?;
        }
        Ok(())
    }
}
