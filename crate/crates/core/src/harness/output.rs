//! Run artifacts on disk.
//!
//! | file                  | content                                              |
//! |-----------------------|------------------------------------------------------|
//! | `config.toml`         | the resolved scenario (re-runnable as is)            |
//! | `metrics.csv`         | `k,global_cost,true_cost_if_known,active_count,delta_<i>...,x_<i>_<d>...` |
//! | `testbed_metrics.csv` | `k` plus every testbed-specific metric               |
//! | `trajectory.csv`      | long format `k,robot,active,x_0,...`                 |
//! | `summary.json`        | final and summed cost, wall time, assumed settings |
//! | `agents.json`         | final state of every agent                           |
//!
//! Floats use Rust's shortest round-trip formatting; missing values (inactive
//! robots, unknown true cost) are empty cells.

use std::path::Path;

use crate::error::{Error, Result};

use super::run::RunArtifacts;

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn metrics_header(artifacts: &RunArtifacts) -> Vec<String> {
    let first = &artifacts.records[0];
    let mut header: Vec<String> = ["k", "global_cost", "true_cost_if_known", "active_count"].map(String::from).to_vec();
    header.extend((0..first.deltas.len()).map(|i| format!("delta_{i}")));
    for (i, x) in first.positions.iter().enumerate() {
        header.extend((0..x.len()).map(|d| format!("x_{i}_{d}")));
    }
    header
}

/// The metrics table as CSV text.
pub fn metrics_csv(artifacts: &RunArtifacts) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(metrics_header(artifacts)).map_err(csv_error)?;
    for r in &artifacts.records {
        let mut row = vec![r.k.to_string(), num(r.global_cost), opt(r.true_cost), r.active_count().to_string()];
        row.extend(r.deltas.iter().map(|d| opt(*d)));
        for (x, on) in r.positions.iter().zip(&r.active) {
            row.extend(x.iter().map(|v| if *on { num(*v) } else { String::new() }));
        }
        w.write_record(&row).map_err(csv_error)?;
    }
    into_string(w)
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(std::io::Error::other(e)))
}

/// Testbed metrics; columns appear in first-seen order, gaps stay empty.
pub fn testbed_metrics_csv(artifacts: &RunArtifacts) -> Result<String> {
    let mut names: Vec<String> = Vec::new();
    for r in &artifacts.records {
        for (n, _) in &r.extras {
            if !names.contains(n) {
                names.push(n.clone());
            }
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["k".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(csv_error)?;
    for r in &artifacts.records {
        let mut row = vec![r.k.to_string()];
        row.extend(names.iter().map(|n| opt(r.extra(n))));
        w.write_record(&row).map_err(csv_error)?;
    }
    into_string(w)
}

pub fn trajectory_csv(artifacts: &RunArtifacts) -> Result<String> {
    let dim = artifacts.records[0].positions[0].len();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["k", "robot", "active"].map(String::from).to_vec();
    header.extend((0..dim).map(|d| format!("x_{d}")));
    w.write_record(&header).map_err(csv_error)?;
    let last_k = artifacts.records.last().map_or(0, |r| r.k + 1);
    let last_active = artifacts.records.last().map(|r| r.active.clone()).unwrap_or_default();
    let rows = artifacts
        .records
        .iter()
        .map(|r| (r.k, &r.positions, &r.active))
        .chain(std::iter::once((last_k, &artifacts.final_positions, &last_active)));
    for (k, positions, active) in rows {
        for (i, x) in positions.iter().enumerate() {
            let mut row = vec![k.to_string(), i.to_string(), u8::from(active[i]).to_string()];
            row.extend(x.iter().map(|v| num(*v)));
            w.write_record(&row).map_err(csv_error)?;
        }
    }
    into_string(w)
}

/// Writes every artifact into `dir`, creating it if needed.
pub fn write_artifacts(artifacts: &RunArtifacts, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), artifacts.config.to_toml_string()?)?;
    std::fs::write(dir.join("metrics.csv"), metrics_csv(artifacts)?)?;
    std::fs::write(dir.join("testbed_metrics.csv"), testbed_metrics_csv(artifacts)?)?;
    std::fs::write(dir.join("trajectory.csv"), trajectory_csv(artifacts)?)?;
    let summary = serde_json::to_string_pretty(&artifacts.summary).map_err(|e| Error::Io(e.into()))?;
    std::fs::write(dir.join("summary.json"), summary + "\n")?;
    let agents = serde_json::to_string(&artifacts.agents).map_err(|e| Error::Io(e.into()))?;
    std::fs::write(dir.join("agents.json"), agents + "\n")?;
    Ok(())
}

/// A numeric CSV read back: header plus rows with empty cells as `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl NumericTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers().map_err(csv_error)?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_error)?;
            let row = rec
                .iter()
                .map(|cell| {
                    if cell.is_empty() {
                        Ok(None)
                    } else {
                        cell.parse::<f64>().map(Some).map_err(|_| Error::Config(format!("non-numeric cell {cell:?}")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}
