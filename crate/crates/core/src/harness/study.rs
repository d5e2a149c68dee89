//! Multi-seed studies over a grid of scenario overrides.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

use super::config::{Mode, ScenarioConfig};
use super::run::{run_scenario, RunSummary};

/// One swept key and the values it takes, e.g. `N=5,10`. The key is a dotted
/// path into the scenario file (`optimizer.M`, `terrain.K`).
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub key: String,
    pub values: Vec<toml::Value>,
}

impl std::str::FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (key, values) = s.split_once('=').ok_or_else(|| Error::Config(format!("sweep {s:?} is not key=v1,v2")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("sweep {s:?} has an empty key")));
        }
        let values = values.split(',').map(|v| parse_value(v.trim())).collect::<Vec<_>>();
        if values.iter().any(|v| matches!(v, toml::Value::String(s) if s.is_empty())) {
            return Err(Error::Config(format!("sweep {s:?} has an empty value")));
        }
        Ok(Self { key: key.to_string(), values })
    }
}

/// Integers, floats and booleans keep their type; anything else is a string.
fn parse_value(text: &str) -> toml::Value {
    if let Ok(i) = text.parse::<i64>() {
        toml::Value::Integer(i)
    } else if let Ok(f) = text.parse::<f64>() {
        toml::Value::Float(f)
    } else if let Ok(b) = text.parse::<bool>() {
        toml::Value::Boolean(b)
    } else {
        toml::Value::String(text.to_string())
    }
}

/// Parses `A..B` (half-open) or `A..=B` into the list of seeds.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("seeds {text:?} is not A..B or A..=B"));
    let (a, b, inclusive) = match text.split_once("..=") {
        Some((a, b)) => (a, b, true),
        None => {
            let (a, b) = text.split_once("..").ok_or_else(bad)?;
            (a, b, false)
        }
    };
    let a: u64 = a.trim().parse().map_err(|_| bad())?;
    let b: u64 = b.trim().parse().map_err(|_| bad())?;
    Ok(if inclusive { (a..=b).collect() } else { (a..b).collect() })
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields at least one part");
    let mut cur = table;
    for p in parts {
        cur = cur
            .entry(p)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("sweep key {key:?}: {p:?} is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Mean with a two-sided 95% Student-t confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub mean: f64,
    pub half_width: f64,
}

impl Interval {
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n < 2 {
            return Err(Error::Config("a confidence interval needs at least two seeds".into()));
        }
        let nf = n as f64;
        let mean = xs.iter().sum::<f64>() / nf;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        let t = StudentsT::new(0.0, 1.0, nf - 1.0).map_err(|e| Error::Domain(e.to_string()))?;
        Ok(Self { mean, half_width: t.inverse_cdf(0.975) * (var / nf).sqrt() })
    }

    pub fn low(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn high(&self) -> f64 {
        self.mean + self.half_width
    }
}

/// `(centralized − distributed) / centralized`: positive when the
/// distributed runs end lower.
pub fn relative_improvement(centralized: f64, distributed: f64) -> f64 {
    (centralized - distributed) / centralized
}

/// Statistics of one grid point across all seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    /// The swept keys and their values at this point.
    pub point: Vec<(String, String)>,
    pub mode: String,
    pub seeds: usize,
    pub final_cost: Interval,
    pub sum_cost: Interval,
    /// Against the centralized row that differs only in mode, if any.
    pub improvement_final: Option<f64>,
    pub improvement_sum: Option<f64>,
    #[serde(skip)]
    pub runs: Vec<RunSummary>,
}

fn grid(sweeps: &[Sweep]) -> Vec<Vec<(String, toml::Value)>> {
    sweeps.iter().fold(vec![Vec::new()], |acc, s| {
        acc.iter()
            .flat_map(|prefix| {
                s.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push((s.key.clone(), v.clone()));
                    p
                })
            })
            .collect()
    })
}

fn show(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Runs every (grid point, seed) pair, in parallel, and summarizes each grid
/// point. The template's own seed is ignored.
pub fn run_study(template: &toml::Table, seeds: &[u64], sweeps: &[Sweep]) -> Result<Vec<StudyRow>> {
    if seeds.len() < 2 {
        return Err(Error::Config("a study needs at least two seeds".into()));
    }
    let points = grid(sweeps);
    let mut configs = Vec::with_capacity(points.len());
    for point in &points {
        let mut table = template.clone();
        for (k, v) in point {
            set_path(&mut table, k, v.clone())?;
        }
        let cfg: ScenarioConfig = table
            .try_into()
            .map_err(|e| Error::Config(format!("study point {}: {e}", label(point))))?;
        cfg.resolved()?;
        configs.push(cfg);
    }
    let jobs: Vec<(usize, u64)> = (0..configs.len()).flat_map(|p| seeds.iter().map(move |s| (p, *s))).collect();
    let results: Vec<(usize, RunSummary)> = jobs
        .par_iter()
        .map(|&(p, seed)| {
            let cfg = ScenarioConfig { seed, ..configs[p].clone() };
            log::info!("study: {} seed {seed}", label(&points[p]));
            run_scenario(&cfg).map(|a| (p, a.summary))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(points.len());
    for (p, point) in points.iter().enumerate() {
        let runs: Vec<RunSummary> = results.iter().filter(|(q, _)| *q == p).map(|(_, s)| s.clone()).collect();
        let finals: Vec<f64> = runs.iter().map(|r| r.final_cost).collect();
        let sums: Vec<f64> = runs.iter().map(|r| r.sum_cost).collect();
        rows.push(StudyRow {
            point: point.iter().map(|(k, v)| (k.clone(), show(v))).collect(),
            mode: configs[p].mode.as_str().into(),
            seeds: runs.len(),
            final_cost: Interval::from_samples(&finals)?,
            sum_cost: Interval::from_samples(&sums)?,
            improvement_final: None,
            improvement_sum: None,
            runs,
        });
    }
    pair_modes(&mut rows);
    Ok(rows)
}

fn label(point: &[(String, toml::Value)]) -> String {
    if point.is_empty() {
        return "template".into();
    }
    point.iter().map(|(k, v)| format!("{k}={}", show(v))).collect::<Vec<_>>().join(" ")
}

fn pair_modes(rows: &mut [StudyRow]) {
    let others = |r: &StudyRow| -> Vec<(String, String)> { r.point.iter().filter(|(k, _)| k != "mode").cloned().collect() };
    let central: Vec<(Vec<(String, String)>, f64, f64)> = rows
        .iter()
        .filter(|r| r.mode == Mode::Centralized.as_str())
        .map(|r| (others(r), r.final_cost.mean, r.sum_cost.mean))
        .collect();
    for r in rows.iter_mut().filter(|r| r.mode == Mode::Distributed.as_str()) {
        let key = others(r);
        if let Some((_, f, s)) = central.iter().find(|(k, _, _)| *k == key) {
            r.improvement_final = Some(relative_improvement(*f, r.final_cost.mean));
            r.improvement_sum = Some(relative_improvement(*s, r.sum_cost.mean));
        }
    }
}

/// The study table as CSV text, one row per grid point.
pub fn study_csv(rows: &[StudyRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    // Mode has its own column.
    let swept = |r: &StudyRow| -> Vec<(String, String)> { r.point.iter().filter(|(k, _)| k != "mode").cloned().collect() };
    let mut header: Vec<String> = rows.first().map(|r| swept(r).into_iter().map(|(k, _)| k).collect()).unwrap_or_default();
    header.extend(
        [
            "mode", "seeds", "final_mean", "final_ci95", "sum_mean", "sum_ci95", "improvement_final", "improvement_sum",
        ]
        .map(String::from),
    );
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(&header).map_err(io)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for r in rows {
        let mut rec: Vec<String> = swept(r).into_iter().map(|(_, v)| v).collect();
        rec.extend([
            r.mode.clone(),
            r.seeds.to_string(),
            format!("{}", r.final_cost.mean),
            format!("{}", r.final_cost.half_width),
            format!("{}", r.sum_cost.mean),
            format!("{}", r.sum_cost.half_width),
            opt(r.improvement_final),
            opt(r.improvement_sum),
        ]);
        w.write_record(&rec).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(std::io::Error::other(e)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_parse_half_open_and_inclusive() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("5..=6").unwrap(), vec![5, 6]);
        assert!(parse_seeds("7").is_err());
    }

    #[test]
    fn sweep_values_keep_their_type() {
        let s: Sweep = "N=5,10".parse().unwrap();
        assert_eq!(s.values, vec![toml::Value::Integer(5), toml::Value::Integer(10)]);
        let s: Sweep = "mode=distributed,centralized".parse().unwrap();
        assert_eq!(s.values[1], toml::Value::String("centralized".into()));
        let s: Sweep = "optimizer.perturbation_scale=0.5".parse().unwrap();
        assert_eq!(s.values, vec![toml::Value::Float(0.5)]);
        assert!("N".parse::<Sweep>().is_err());
    }

    #[test]
    fn interval_matches_hand_computed_t_value() {
        // {0, 2}: mean 1, s = sqrt(2), so the half width is t_{0.975, 1} = 12.7062.
        let iv = Interval::from_samples(&[0.0, 2.0]).unwrap();
        assert_eq!(iv.mean, 1.0);
        assert!((iv.half_width - 12.706_204_736).abs() < 1e-6);
        assert!(Interval::from_samples(&[1.0]).is_err());
    }

    #[test]
    fn improvement_is_relative_to_centralized() {
        assert!((relative_improvement(100.0, 77.0) - 0.23).abs() < 1e-12);
    }

    #[test]
    fn single_seed_is_rejected() {
        let t: toml::Table = toml::from_str("testbed = \"synthetic-quadratic\"\nN = 2\niterations = 5").unwrap();
        assert!(matches!(run_study(&t, &[1], &[]), Err(Error::Config(_))));
    }

    #[test]
    fn grid_is_the_cartesian_product() {
        let sweeps: Vec<Sweep> = vec!["N=1,2".parse().unwrap(), "mode=distributed,centralized".parse().unwrap()];
        assert_eq!(grid(&sweeps).len(), 4);
        assert_eq!(grid(&[]).len(), 1);
    }

    #[test]
    fn mode_sweep_fills_improvement() {
        let t: toml::Table = toml::from_str("testbed = \"synthetic-quadratic\"\nN = 2\niterations = 6").unwrap();
        let rows = run_study(&t, &[1, 2], &["mode=distributed,centralized".parse().unwrap()]).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].improvement_final.is_some());
        assert!(rows[1].improvement_final.is_none());
        let csv = study_csv(&rows).unwrap();
        assert_eq!(csv.lines().count(), 3);
    }
}
