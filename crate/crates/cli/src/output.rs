//! CSV and JSON writers for run directories and figure bundles.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{ensure, Context, Result};
use ffprep::protocol::EnsembleSummary;
use serde::Serialize;

pub const SERIES_COLUMNS: [&str; 6] = ["t", "mean_energy", "sem_energy", "mean_infidelity", "sem_infidelity", "n_alive"];

/// Plain columns of equal length, written in order.
pub struct Table {
    pub columns: Vec<(String, Vec<f64>)>,
}

impl Table {
    pub fn new() -> Self {
        Self { columns: Vec::new() }
    }

    pub fn push(&mut self, name: &str, values: Vec<f64>) -> &mut Self {
        self.columns.push((name.to_string(), values));
        self
    }

    pub fn from_summary(s: &EnsembleSummary) -> Self {
        let alive = s.n_alive.iter().map(|&n| n as f64).collect();
        let values = [s.t.clone(), s.mean_energy.clone(), s.sem_energy.clone(), s.mean_infidelity.clone(), s.sem_infidelity.clone(), alive];
        Self { columns: SERIES_COLUMNS.iter().map(|c| c.to_string()).zip(values).collect() }
    }

    pub fn to_csv(&self) -> Result<String> {
        let rows = self.columns.first().map_or(0, |c| c.1.len());
        for (name, col) in &self.columns {
            ensure!(col.len() == rows, "column {name} has {} rows, expected {rows}", col.len());
        }
        let mut out = self.columns.iter().map(|c| c.0.as_str()).collect::<Vec<_>>().join(",");
        out.push('\n');
        for r in 0..rows {
            for (k, (_, col)) in self.columns.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write!(out, "{}", col[r]).expect("string write");
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?).with_context(|| format!("writing {}", path.display()))
    }
}

impl Default for Table {
    fn default() -> Self {
        Self::new()
    }
}

/// Pretty JSON with a trailing newline. Maps come out key-sorted.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    std::fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}
