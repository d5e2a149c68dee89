//! Aerial surveillance of an unknown heightmapped terrain.
//!
//! Robots fly in 3D above a terrain they do not know. Each one sees the
//! terrain cells it has unobstructed line of sight to and that lie within its
//! sensing range, and measures their distance with noise growing with the
//! square of that distance. The cost rewards close views of visible cells
//! and penalises every cell nobody sees; detected targets add a proximity
//! term.

use rand::Rng;
use rayon::prelude::*;

use super::grid_file::GridFile;
use crate::coordinator::{Neighbor, Testbed, TestbedEvent};
use crate::error::{Error, Result};
use crate::rng::{hashed_normal, stream_key, substream, Stream};
use crate::RobotId;

/// Heights on a regular node grid, bilinearly interpolated in between.
#[derive(Debug, Clone, PartialEq)]
pub struct Terrain {
    rows: usize,
    cols: usize,
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    dx: f64,
    dy: f64,
    heights: Vec<f64>,
}

impl Terrain {
    /// Row `i` sits at `y_min + i * dy`, column `j` at `x_min + j * dx`.
    pub fn new(grid: GridFile) -> Result<Self> {
        if grid.rows < 2 || grid.cols < 2 {
            return Err(Error::Config("terrain needs at least 2x2 nodes".into()));
        }
        if grid.values.len() != grid.rows * grid.cols || grid.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("terrain heights must be finite and fill the grid".into()));
        }
        Ok(Self {
            rows: grid.rows,
            cols: grid.cols,
            x_min: grid.x_min,
            x_max: grid.x_max,
            y_min: grid.y_min,
            y_max: grid.y_max,
            dx: (grid.x_max - grid.x_min) / (grid.cols - 1) as f64,
            dy: (grid.y_max - grid.y_min) / (grid.rows - 1) as f64,
            heights: grid.values,
        })
    }

    pub fn flat(rows: usize, cols: usize, extent: [f64; 4], height: f64) -> Result<Self> {
        let [x_min, x_max, y_min, y_max] = extent;
        Self::new(GridFile { rows, cols, x_min, x_max, y_min, y_max, values: vec![height; rows * cols] })
    }

    /// Seeded fractal value noise over `extent`, rescaled to `[0, max_height]`.
    pub fn procedural(seed: u64, extent: [f64; 4], spacing: f64, max_height: f64) -> Result<Self> {
        let [x_min, x_max, y_min, y_max] = extent;
        if !(spacing > 0.0 && x_max > x_min && y_max > y_min && max_height >= 0.0) {
            return Err(Error::Config("invalid procedural terrain parameters".into()));
        }
        let cols = ((x_max - x_min) / spacing).round() as usize + 1;
        let rows = ((y_max - y_min) / spacing).round() as usize + 1;
        let base_wavelength = (x_max - x_min).max(y_max - y_min) / 2.0;
        let octaves = 5;
        let layers: Vec<ValueNoise> = (0..octaves)
            .map(|o| {
                let wavelength = base_wavelength / f64::powi(2.0, o as i32);
                ValueNoise::new(&mut substream(seed, "terrain", o as u64, 0), extent, wavelength)
            })
            .collect();
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            let y = y_min + (y_max - y_min) * i as f64 / (rows - 1) as f64;
            for j in 0..cols {
                let x = x_min + (x_max - x_min) * j as f64 / (cols - 1) as f64;
                let v: f64 = layers.iter().enumerate().map(|(o, l)| 0.5f64.powi(o as i32) * l.at(x, y)).sum();
                values.push(v);
            }
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = (hi - lo).max(f64::MIN_POSITIVE);
        for v in &mut values {
            *v = (*v - lo) / span * max_height;
        }
        Self::new(GridFile { rows, cols, x_min, x_max, y_min, y_max, values })
    }

    pub fn to_grid_file(&self) -> GridFile {
        GridFile {
            rows: self.rows,
            cols: self.cols,
            x_min: self.x_min,
            x_max: self.x_max,
            y_min: self.y_min,
            y_max: self.y_max,
            values: self.heights.clone(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn spacing(&self) -> (f64, f64) {
        (self.dx, self.dy)
    }

    pub fn extent(&self) -> [f64; 4] {
        [self.x_min, self.x_max, self.y_min, self.y_max]
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn total_area(&self) -> f64 {
        self.cell_area() * self.cell_count() as f64
    }

    pub fn max_height(&self) -> f64 {
        self.heights.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }

    /// Ground point of cell `c` (a grid node).
    pub fn cell_point(&self, c: usize) -> [f64; 3] {
        let (i, j) = (c / self.cols, c % self.cols);
        [self.x_min + j as f64 * self.dx, self.y_min + i as f64 * self.dy, self.heights[c]]
    }

    /// Bilinear height, clamped to the grid outside the extent.
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        let fx = ((x - self.x_min) / self.dx).clamp(0.0, (self.cols - 1) as f64);
        let fy = ((y - self.y_min) / self.dy).clamp(0.0, (self.rows - 1) as f64);
        let j = (fx.floor() as usize).min(self.cols - 2);
        let i = (fy.floor() as usize).min(self.rows - 2);
        let (tx, ty) = (fx - j as f64, fy - i as f64);
        let h = |r: usize, c: usize| self.heights[r * self.cols + c];
        let bottom = h(i, j) * (1.0 - tx) + h(i, j + 1) * tx;
        let top = h(i + 1, j) * (1.0 - tx) + h(i + 1, j + 1) * tx;
        bottom * (1.0 - ty) + top * ty
    }

    /// Whether the segment `a -> b` clears the terrain.
    ///
    /// The segment is sampled at spacing no larger than half the smaller
    /// grid spacing; every sample except `b` itself must be strictly above
    /// the interpolated terrain.
    pub fn line_of_sight(&self, a: &[f64; 3], b: &[f64; 3]) -> bool {
        let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let max_gap = 0.5 * self.dx.min(self.dy);
        let samples = ((len / max_gap).ceil() as usize).max(1);
        (0..samples).all(|s| {
            let t = s as f64 / samples as f64;
            let p = [a[0] + t * d[0], a[1] + t * d[1], a[2] + t * d[2]];
            p[2] > self.height_at(p[0], p[1])
        })
    }
}

/// One octave of smoothly interpolated lattice noise.
struct ValueNoise {
    origin: [f64; 2],
    wavelength: f64,
    nx: usize,
    values: Vec<f64>,
}

impl ValueNoise {
    fn new(rng: &mut Stream, extent: [f64; 4], wavelength: f64) -> Self {
        let nx = ((extent[1] - extent[0]) / wavelength).ceil() as usize + 2;
        let ny = ((extent[3] - extent[2]) / wavelength).ceil() as usize + 2;
        let values = (0..nx * ny).map(|_| rng.random::<f64>()).collect();
        Self { origin: [extent[0], extent[2]], wavelength, nx, values }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let fx = (x - self.origin[0]) / self.wavelength;
        let fy = (y - self.origin[1]) / self.wavelength;
        let (j, i) = (fx.floor() as usize, fy.floor() as usize);
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let (tx, ty) = (smooth(fx - j as f64), smooth(fy - i as f64));
        let v = |r: usize, c: usize| self.values[r * self.nx + c];
        let bottom = v(i, j) * (1.0 - tx) + v(i, j + 1) * tx;
        let top = v(i + 1, j) * (1.0 - tx) + v(i + 1, j + 1) * tx;
        bottom * (1.0 - ty) + top * ty
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Range-limited distance sensor with noise `c * d^2 * xi`, `xi ~ N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    pub thres: f64,
    pub noise_gain: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self { thres: 40.0, noise_gain: 1e-3 }
    }
}

impl SensorModel {
    pub fn noisy(&self, d: f64, xi: f64) -> f64 {
        d + self.noise_gain * d * d * xi
    }
}

/// What a single robot reports in one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainMeasurement {
    pub position: [f64; 3],
    /// Visible cells and their noisy distances.
    pub footprint: Vec<(u32, f64)>,
    /// Noise-free distances aligned with `footprint`.
    pub exact: Vec<f64>,
    /// Noisy distance to each detected target (indexed like the testbed's
    /// target list); `None` for targets not yet detected.
    pub targets: Vec<Option<f64>>,
}

/// Sensing of one robot at `x`. Noise for cell `c` is drawn from the counter
/// `c` of the stream keyed by `noise_key`, so the result does not depend on
/// evaluation order.
pub fn sense_robot(terrain: &Terrain, sensor: &SensorModel, x: &[f64; 3], noise_key: u64) -> (Vec<(u32, f64)>, Vec<f64>) {
    let (dx, dy) = terrain.spacing();
    let [x_min, _, y_min, _] = terrain.extent();
    let reach = sensor.thres;
    let j_lo = (((x[0] - reach - x_min) / dx).floor().max(0.0)) as usize;
    let j_hi = ((((x[0] + reach - x_min) / dx).ceil()).max(0.0) as usize).min(terrain.cols() - 1);
    let i_lo = (((x[1] - reach - y_min) / dy).floor().max(0.0)) as usize;
    let i_hi = ((((x[1] + reach - y_min) / dy).ceil()).max(0.0) as usize).min(terrain.rows() - 1);
    let mut footprint = Vec::new();
    let mut exact = Vec::new();
    for i in i_lo..=i_hi {
        for j in j_lo..=j_hi {
            let c = i * terrain.cols() + j;
            let q = terrain.cell_point(c);
            let d = distance(x, &q);
            if d <= sensor.thres && terrain.line_of_sight(x, &q) {
                footprint.push((c as u32, sensor.noisy(d, hashed_normal(noise_key, c as u64))));
                exact.push(d);
            }
        }
    }
    (footprint, exact)
}

/// Visible mask and the smallest reported distance per visible cell.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityResult {
    pub visible: Vec<bool>,
    pub nearest_measurement: Vec<f64>,
}

impl VisibilityResult {
    pub fn from_footprints<'a>(cells: usize, footprints: impl IntoIterator<Item = &'a [(u32, f64)]>) -> Self {
        let mut nearest = vec![f64::INFINITY; cells];
        for fp in footprints {
            for &(c, d) in fp {
                let slot = &mut nearest[c as usize];
                if d < *slot {
                    *slot = d;
                }
            }
        }
        let visible = nearest.iter().map(|d| d.is_finite()).collect();
        Self { visible, nearest_measurement: nearest }
    }

    pub fn visible_count(&self) -> usize {
        self.visible.iter().filter(|v| **v).count()
    }
}

/// Visibility of the whole team at iteration `k`.
pub fn sense_terrain(robots: &[(RobotId, [f64; 3])], terrain: &Terrain, sensor: &SensorModel, seed: u64, k: usize) -> VisibilityResult {
    let footprints: Vec<Vec<(u32, f64)>> = robots
        .iter()
        .map(|(id, x)| sense_robot(terrain, sensor, x, stream_key(seed, "sensor", *id as u64, k as u64)).0)
        .collect();
    VisibilityResult::from_footprints(terrain.cell_count(), footprints.iter().map(|f| f.as_slice()))
}

/// `sum_visible nearest * area + K * invisible area`.
pub fn surveillance_cost(vis: &VisibilityResult, terrain: &Terrain, k_weight: f64) -> f64 {
    let area = terrain.cell_area();
    let mut seen = 0.0;
    let mut hidden = 0usize;
    for (v, d) in vis.visible.iter().zip(&vis.nearest_measurement) {
        if *v {
            seen += d;
        } else {
            hidden += 1;
        }
    }
    seen * area + k_weight * hidden as f64 * area
}

/// Surveillance cost plus `K_t` times the closest reported distance to each
/// target that has a report.
pub fn monitoring_cost(vis: &VisibilityResult, terrain: &Terrain, k_weight: f64, target_distances: &[Option<f64>], k_target: f64) -> f64 {
    surveillance_cost(vis, terrain, k_weight) + k_target * target_distances.iter().flatten().sum::<f64>()
}

/// Safety envelope: altitude band above the terrain and pairwise spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightLimits {
    pub d_h: f64,
    pub d_r: f64,
    pub z_max: f64,
}

impl Default for FlightLimits {
    fn default() -> Self {
        Self { d_h: 0.5, d_r: 0.5, z_max: 25.0 }
    }
}

/// Whether a single position is inside the bounds and altitude band.
pub fn position_ok(terrain: &Terrain, limits: &FlightLimits, x: &[f64]) -> bool {
    x.len() == 3
        && terrain.contains(x[0], x[1])
        && x[2] >= terrain.height_at(x[0], x[1]) + limits.d_h
        && x[2] <= limits.z_max
}

fn separation(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Joint feasibility of a configuration.
pub fn check_constraints(terrain: &Terrain, limits: &FlightLimits, robots: &[&[f64]]) -> bool {
    explain_violation(terrain, limits, robots).is_none()
}

fn explain_violation(terrain: &Terrain, limits: &FlightLimits, robots: &[&[f64]]) -> Option<String> {
    for (i, x) in robots.iter().enumerate() {
        if !position_ok(terrain, limits, x) {
            return Some(format!("robot {i} at {x:?} is outside the flight envelope"));
        }
    }
    for i in 0..robots.len() {
        for j in i + 1..robots.len() {
            let s = separation(robots[i], robots[j]);
            if s < limits.d_r {
                return Some(format!("robots {i} and {j} are {s} apart"));
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub position: [f64; 3],
    pub appeared_at: usize,
    pub detected: bool,
}

#[derive(Debug, Clone)]
pub struct TerrainSurveillance {
    terrain: Terrain,
    sensor: SensorModel,
    limits: FlightLimits,
    k_weight: f64,
    k_target: f64,
    noise_seed: u64,
    targets: Vec<Target>,
    launch: [f64; 4],
}

impl TerrainSurveillance {
    pub fn new(terrain: Terrain, sensor: SensorModel, limits: FlightLimits, k_weight: f64, k_target: f64, noise_seed: u64) -> Self {
        let launch = terrain.extent();
        Self { terrain, sensor, limits, k_weight, k_target, noise_seed, targets: Vec::new(), launch }
    }

    pub fn terrain(&self) -> &Terrain {
        &self.terrain
    }

    pub fn sensor(&self) -> &SensorModel {
        &self.sensor
    }

    pub fn limits(&self) -> &FlightLimits {
        &self.limits
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    /// Restricts initial placement to a `width x height` box at a random
    /// location inside the terrain: the team starts crowded in a sub-area.
    pub fn with_random_launch_area(mut self, width: f64, height: f64, rng: &mut Stream) -> Self {
        let [x_min, x_max, y_min, y_max] = self.terrain.extent();
        let w = width.min(x_max - x_min);
        let h = height.min(y_max - y_min);
        let x0 = x_min + rng.random::<f64>() * (x_max - x_min - w);
        let y0 = y_min + rng.random::<f64>() * (y_max - y_min - h);
        self.launch = [x0, x0 + w, y0, y0 + h];
        self
    }

    pub fn launch_area(&self) -> [f64; 4] {
        self.launch
    }

    /// A start inside the launch area, a few metres above the ground.
    pub fn sample_start(&self, rng: &mut Stream) -> Vec<f64> {
        let [x0, x1, y0, y1] = self.launch;
        let x = x0 + rng.random::<f64>() * (x1 - x0);
        let y = y0 + rng.random::<f64>() * (y1 - y0);
        let ground = self.terrain.height_at(x, y) + self.limits.d_h;
        let top = (ground + 5.0).min(self.limits.z_max);
        vec![x, y, ground + rng.random::<f64>() * (top - ground).max(0.0)]
    }

    fn visibility(&self, ys: &[&TerrainMeasurement]) -> VisibilityResult {
        VisibilityResult::from_footprints(self.terrain.cell_count(), ys.iter().map(|y| y.footprint.as_slice()))
    }

    fn closest_target_reports(&self, ys: &[&TerrainMeasurement]) -> Vec<Option<f64>> {
        (0..self.targets.len())
            .map(|t| {
                ys.iter()
                    .filter_map(|y| y.targets.get(t).copied().flatten())
                    .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.min(d))))
            })
            .collect()
    }

    fn detects(&self, x: &[f64; 3], target: &[f64; 3]) -> bool {
        distance(x, target) <= self.sensor.thres && self.terrain.line_of_sight(x, target)
    }
}

fn as_point(x: &[f64]) -> [f64; 3] {
    [x[0], x[1], x[2]]
}

impl Testbed for TerrainSurveillance {
    type Measurement = TerrainMeasurement;

    fn name(&self) -> &'static str {
        "terrain"
    }

    fn dim(&self) -> usize {
        3
    }

    fn observe(&mut self, k: usize, robots: &[(RobotId, &[f64])]) -> Result<Vec<TerrainMeasurement>> {
        for (id, x) in robots {
            if !position_ok(&self.terrain, &self.limits, x) {
                return Err(Error::Domain(format!("robot {id} at {x:?} cannot sense from outside the flight envelope")));
            }
        }
        for t in self.targets.iter_mut().filter(|t| !t.detected) {
            let pos = t.position;
            t.detected = robots.iter().any(|(_, x)| {
                let p = as_point(x);
                distance(&p, &pos) <= self.sensor.thres && self.terrain.line_of_sight(&p, &pos)
            });
        }
        let cells = self.terrain.cell_count() as u64;
        let this = &*self;
        Ok(robots
            .par_iter()
            .map(|(id, x)| {
                let p = as_point(x);
                let key = stream_key(this.noise_seed, "sensor", *id as u64, k as u64);
                let (footprint, exact) = sense_robot(&this.terrain, &this.sensor, &p, key);
                let targets = this
                    .targets
                    .iter()
                    .enumerate()
                    .map(|(t, target)| {
                        target.detected.then(|| {
                            this.sensor.noisy(distance(&p, &target.position), hashed_normal(key, cells + t as u64))
                        })
                    })
                    .collect();
                TerrainMeasurement { position: p, footprint, exact, targets }
            })
            .collect())
    }

    fn cost(&self, ys: &[&TerrainMeasurement]) -> f64 {
        let vis = self.visibility(ys);
        monitoring_cost(&vis, &self.terrain, self.k_weight, &self.closest_target_reports(ys), self.k_target)
    }

    fn admits_move(&self, _robot: RobotId, _from: &[f64], to: &[f64], others: &[Neighbor<'_>]) -> bool {
        position_ok(&self.terrain, &self.limits, to)
            && others.iter().all(|o| separation(to, o.x) >= self.limits.d_r + o.max_step)
    }

    fn check_joint(&self, robots: &[(RobotId, &[f64])]) -> std::result::Result<(), String> {
        let xs: Vec<&[f64]> = robots.iter().map(|(_, x)| *x).collect();
        match explain_violation(&self.terrain, &self.limits, &xs) {
            Some(msg) => Err(msg),
            None => Ok(()),
        }
    }

    fn extra_metrics(&self, robots: &[(RobotId, &[f64])], ys: &[&TerrainMeasurement]) -> Vec<(String, f64)> {
        let mut nearest = vec![f64::INFINITY; self.terrain.cell_count()];
        for y in ys {
            for ((c, _), d) in y.footprint.iter().zip(&y.exact) {
                let slot = &mut nearest[*c as usize];
                *slot = slot.min(*d);
            }
        }
        let vis = VisibilityResult { visible: nearest.iter().map(|d| d.is_finite()).collect(), nearest_measurement: nearest };
        let hidden = self.terrain.cell_count() - vis.visible_count();
        let mut out = vec![
            ("noiseless_cost".to_string(), surveillance_cost(&vis, &self.terrain, self.k_weight)),
            ("invisible_area".to_string(), hidden as f64 * self.terrain.cell_area()),
        ];
        for (t, target) in self.targets.iter().enumerate() {
            let d = robots
                .iter()
                .map(|(_, x)| distance(&as_point(x), &target.position))
                .fold(f64::INFINITY, f64::min);
            out.push((format!("target_{t}_distance"), d));
            out.push((format!("target_{t}_detected"), if target.detected { 1.0 } else { 0.0 }));
        }
        out
    }

    fn apply_event(&mut self, k: usize, event: &TestbedEvent) -> Result<()> {
        match event {
            TestbedEvent::SpawnTarget { position } => {
                if position.len() != 3 || position.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config(format!("target position {position:?} must be three finite numbers")));
                }
                let p = as_point(position);
                if !self.terrain.contains(p[0], p[1]) {
                    return Err(Error::Config(format!("target position {position:?} lies outside the terrain")));
                }
                self.targets.push(Target { position: p, appeared_at: k, detected: false });
                Ok(())
            }
        }
    }
}

impl TerrainSurveillance {
    /// Whether any of `robots` currently detects target `t`.
    pub fn target_in_view(&self, t: usize, robots: &[&[f64]]) -> bool {
        self.targets.get(t).is_some_and(|target| robots.iter().any(|x| self.detects(&as_point(x), &target.position)))
    }
}
