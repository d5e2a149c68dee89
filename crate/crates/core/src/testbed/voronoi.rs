//! Adaptive coverage of an unknown sensory field on the unit square.
//!
//! The environment is a uniform grid; the importance density is a weighted sum
//! of Gaussian bumps whose weights are unknown to the team. Robots measure the
//! density at their own positions, the pooled measurements refine a shared
//! weight estimate, and the cost is the density-weighted Voronoi coverage cost
//! of the estimated field.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::coordinator::{Neighbor, Testbed};
use crate::error::{Error, Result};
use crate::linalg::{lstsq_min_norm, DEFAULT_RCOND};
use crate::rng::Stream;
use crate::RobotId;

pub const DEFAULT_PRIOR: f64 = 0.1;

/// Uniform `r x r` grid over `[0, 1]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEnvironment {
    points: Vec<[f64; 2]>,
}

impl GridEnvironment {
    pub fn uniform(resolution: usize) -> Self {
        assert!(resolution >= 2, "grid resolution must be at least 2");
        let step = 1.0 / (resolution - 1) as f64;
        let points = (0..resolution)
            .flat_map(|i| (0..resolution).map(move |j| [i as f64 * step, j as f64 * step]))
            .collect();
        Self { points }
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Area represented by each point.
    pub fn cell_area(&self) -> f64 {
        1.0 / self.points.len() as f64
    }
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Owner of each grid point: nearest robot, ties to the lowest id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoronoiPartition {
    pub assignment: Vec<RobotId>,
}

pub fn voronoi_assign(robots: &[(RobotId, &[f64])], grid: &GridEnvironment) -> Result<VoronoiPartition> {
    if robots.is_empty() {
        return Err(Error::NoActiveRobots);
    }
    let assignment = grid
        .points()
        .iter()
        .map(|q| nearest(robots, q).0)
        .collect();
    Ok(VoronoiPartition { assignment })
}

fn nearest(robots: &[(RobotId, &[f64])], q: &[f64; 2]) -> (RobotId, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for &(id, x) in robots {
        let d = dist_sq(x, q);
        if d < best.1 || (d == best.1 && id < best.0) {
            best = (id, d);
        }
    }
    best
}

/// `sum_q 1/2 min_i ||q - x_i||^2 * density(q) * cell_area`.
pub fn coverage_cost(robots: &[(RobotId, &[f64])], grid: &GridEnvironment, density: &[f64]) -> f64 {
    let area = grid.cell_area();
    grid.points()
        .iter()
        .zip(density)
        .map(|(q, w)| 0.5 * nearest(robots, q).1 * w)
        .sum::<f64>()
        * area
}

/// Gaussian basis `K_j(q) = exp(-|q - mu_j|^2 / (2 s^2)) / (2 pi s^2)` and
/// its true and estimated weights.
#[derive(Debug, Clone)]
pub struct SensoryField {
    centers: Vec<[f64; 2]>,
    sigma: f64,
    truth: Vec<f64>,
    estimate: Vec<f64>,
    prior: f64,
    // Running triangular factor of the pooled design, and the matching
    // projected residual targets (targets taken relative to the prior).
    r: Option<DMatrix<f64>>,
    c: Option<DVector<f64>>,
    samples: usize,
}

impl SensoryField {
    /// `per_side x per_side` centres at the midpoints of a uniform partition.
    pub fn lattice(per_side: usize, sigma: f64, truth: Vec<f64>) -> Result<Self> {
        let w = per_side * per_side;
        if truth.len() != w {
            return Err(Error::DimensionMismatch { expected: w, got: truth.len() });
        }
        if !(sigma > 0.0) {
            return Err(Error::Config("sigma must be positive".into()));
        }
        let centers = (0..per_side)
            .flat_map(|i| {
                (0..per_side).map(move |j| {
                    [(2 * i + 1) as f64 / (2 * per_side) as f64, (2 * j + 1) as f64 / (2 * per_side) as f64]
                })
            })
            .collect();
        Ok(Self {
            centers,
            sigma,
            truth,
            estimate: vec![DEFAULT_PRIOR; w],
            prior: DEFAULT_PRIOR,
            r: None,
            c: None,
            samples: 0,
        })
    }

    /// Background weight everywhere except two distinct random peaks.
    pub fn two_peaks(per_side: usize, sigma: f64, background: f64, peak: f64, rng: &mut Stream) -> Result<(Self, [usize; 2])> {
        let w = per_side * per_side;
        if w < 2 {
            return Err(Error::Config("need at least two basis functions".into()));
        }
        let a = rng.random_range(0..w);
        let mut b = rng.random_range(0..w - 1);
        if b >= a {
            b += 1;
        }
        let mut truth = vec![background; w];
        truth[a] = peak;
        truth[b] = peak;
        Ok((Self::lattice(per_side, sigma, truth)?, [a, b]))
    }

    pub fn centers(&self) -> &[[f64; 2]] {
        &self.centers
    }

    pub fn truth(&self) -> &[f64] {
        &self.truth
    }

    pub fn estimate(&self) -> &[f64] {
        &self.estimate
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn basis(&self, x: &[f64]) -> Vec<f64> {
        let norm = 1.0 / (std::f64::consts::TAU * self.sigma * self.sigma);
        let two_s2 = 2.0 * self.sigma * self.sigma;
        self.centers.iter().map(|m| norm * (-dist_sq(x, m) / two_s2).exp()).collect()
    }

    fn value(&self, x: &[f64], weights: &[f64]) -> f64 {
        self.basis(x).iter().zip(weights).map(|(k, w)| k * w).sum()
    }

    /// Noise-free sensor reading `K(x)^T upsilon`.
    pub fn measure(&self, x: &[f64]) -> Result<f64> {
        if x.len() != 2 || !x.iter().all(|v| (0.0..=1.0).contains(v)) {
            return Err(Error::Domain(format!("sensor position {x:?} outside the unit square")));
        }
        Ok(self.value(x, &self.truth))
    }

    pub fn estimated_density(&self, q: &[f64]) -> f64 {
        self.value(q, &self.estimate)
    }

    pub fn true_density(&self, q: &[f64]) -> f64 {
        self.value(q, &self.truth)
    }

    /// Folds new `(position, reading)` pairs into the pooled fit and refreshes
    /// the estimate: the minimum-norm correction from the prior that best
    /// explains every reading so far.
    pub fn update_estimate(&mut self, readings: &[([f64; 2], f64)]) -> Result<()> {
        if readings.is_empty() {
            return Ok(());
        }
        let w = self.centers.len();
        let prior = self.prior;
        let old_rows = self.r.as_ref().map_or(0, |r| r.nrows());
        let rows = old_rows + readings.len();
        let mut a = DMatrix::zeros(rows, w);
        let mut b = DVector::zeros(rows);
        if let (Some(r), Some(c)) = (&self.r, &self.c) {
            a.view_mut((0, 0), (old_rows, w)).copy_from(r);
            b.rows_mut(0, old_rows).copy_from(c);
        }
        for (i, (x, y)) in readings.iter().enumerate() {
            let k = self.basis(x);
            let predicted: f64 = k.iter().sum::<f64>() * prior;
            for (j, v) in k.iter().enumerate() {
                a[(old_rows + i, j)] = *v;
            }
            b[old_rows + i] = y - predicted;
        }
        // Compress to a square factor: ||A d - b|| = ||R d - Q^T b|| + const.
        let (r, c) = if rows > w {
            let qr = a.qr();
            let q = qr.q();
            let c = q.transpose() * &b;
            (qr.r(), c)
        } else {
            (a, b)
        };
        let correction = lstsq_min_norm(&r, &c, DEFAULT_RCOND)?;
        self.estimate = correction.iter().map(|d| prior + d).collect();
        self.r = Some(r);
        self.c = Some(c);
        self.samples += readings.len();
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    Random,
    RightHalf,
}

/// What one robot reports: where it is and what it read there.
#[derive(Debug, Clone, PartialEq)]
pub struct VoronoiMeasurement {
    pub position: [f64; 2],
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct VoronoiCoverage {
    grid: GridEnvironment,
    field: SensoryField,
    peaks: Vec<usize>,
    estimated_density: Vec<f64>,
    true_density: Vec<f64>,
}

impl VoronoiCoverage {
    pub fn new(grid: GridEnvironment, field: SensoryField, peaks: Vec<usize>) -> Self {
        let true_density = grid.points().iter().map(|q| field.true_density(q)).collect();
        let estimated_density = grid.points().iter().map(|q| field.estimated_density(q)).collect();
        Self { grid, field, peaks, estimated_density, true_density }
    }

    pub fn grid(&self) -> &GridEnvironment {
        &self.grid
    }

    pub fn field(&self) -> &SensoryField {
        &self.field
    }

    /// Centres of the dominant basis functions.
    pub fn peak_positions(&self) -> Vec<[f64; 2]> {
        self.peaks.iter().map(|&p| self.field.centers()[p]).collect()
    }

    pub fn estimated_density(&self) -> &[f64] {
        &self.estimated_density
    }

    pub fn true_density(&self) -> &[f64] {
        &self.true_density
    }

    pub fn initial_position(mode: InitMode, rng: &mut Stream) -> Vec<f64> {
        match mode {
            InitMode::Random => vec![rng.random::<f64>(), rng.random::<f64>()],
            InitMode::RightHalf => vec![rng.random_range(0.5..=1.0), rng.random::<f64>()],
        }
    }

    fn upsilon_error(&self) -> f64 {
        self.field
            .estimate()
            .iter()
            .zip(self.field.truth())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

fn in_unit_square(x: &[f64]) -> bool {
    x.len() == 2 && x.iter().all(|v| (0.0..=1.0).contains(v))
}

impl Testbed for VoronoiCoverage {
    type Measurement = VoronoiMeasurement;

    fn name(&self) -> &'static str {
        "voronoi"
    }

    fn dim(&self) -> usize {
        2
    }

    fn observe(&mut self, _k: usize, robots: &[(RobotId, &[f64])]) -> Result<Vec<VoronoiMeasurement>> {
        let ys = robots
            .iter()
            .map(|(_, x)| Ok(VoronoiMeasurement { position: [x[0], x[1]], value: self.field.measure(x)? }))
            .collect::<Result<Vec<_>>>()?;
        let readings: Vec<([f64; 2], f64)> = ys.iter().map(|y| (y.position, y.value)).collect();
        self.field.update_estimate(&readings)?;
        self.estimated_density = self.grid.points().iter().map(|q| self.field.estimated_density(q)).collect();
        Ok(ys)
    }

    fn cost(&self, ys: &[&VoronoiMeasurement]) -> f64 {
        let robots: Vec<(RobotId, &[f64])> = ys.iter().enumerate().map(|(i, y)| (i, &y.position[..])).collect();
        coverage_cost(&robots, &self.grid, &self.estimated_density)
    }

    fn true_cost(&self, robots: &[(RobotId, &[f64])]) -> Option<f64> {
        Some(coverage_cost(robots, &self.grid, &self.true_density))
    }

    fn admits_move(&self, _robot: RobotId, _from: &[f64], to: &[f64], _others: &[Neighbor<'_>]) -> bool {
        in_unit_square(to)
    }

    fn check_joint(&self, robots: &[(RobotId, &[f64])]) -> std::result::Result<(), String> {
        match robots.iter().find(|(_, x)| !in_unit_square(x)) {
            Some((id, x)) => Err(format!("robot {id} at {x:?} left the unit square")),
            None => Ok(()),
        }
    }

    fn extra_metrics(&self, _robots: &[(RobotId, &[f64])], _ys: &[&VoronoiMeasurement]) -> Vec<(String, f64)> {
        vec![("upsilon_error".into(), self.upsilon_error())]
    }
}
