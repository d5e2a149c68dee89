//! Persistent coverage of a decaying field among unknown obstacles.
//!
//! Every cell carries a coverage level that decays geometrically and is
//! replenished by nearby robots with line of sight to it. The team tries to
//! hold the level at a target value everywhere; the cost is the squared gap
//! summed over free cells. The production model drives the simulation only;
//! agents never see it.

use rand::Rng;

use super::grid_file::GridFile;
use crate::coordinator::{Neighbor, Testbed};
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::RobotId;

/// Unit cells on `[0, nx] x [0, ny]`; cell `(ix, iy)` has centre
/// `(ix + 0.5, iy + 0.5)` and index `iy * nx + ix`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleMap {
    nx: usize,
    ny: usize,
    blocked: Vec<bool>,
}

impl ObstacleMap {
    pub fn free(nx: usize, ny: usize) -> Self {
        Self { nx, ny, blocked: vec![false; nx * ny] }
    }

    pub fn from_cells(nx: usize, ny: usize, blocked: Vec<bool>) -> Result<Self> {
        if blocked.len() != nx * ny || nx == 0 || ny == 0 {
            return Err(Error::Config(format!("obstacle map needs {} cells, got {}", nx * ny, blocked.len())));
        }
        Ok(Self { nx, ny, blocked })
    }

    /// 0/1 grid: rows are `y`, columns are `x`.
    pub fn from_grid_file(grid: &GridFile) -> Result<Self> {
        if grid.values.iter().any(|v| *v != 0.0 && *v != 1.0) {
            return Err(Error::Config("obstacle map values must be 0 or 1".into()));
        }
        Self::from_cells(grid.cols, grid.rows, grid.values.iter().map(|v| *v == 1.0).collect())
    }

    pub fn to_grid_file(&self) -> GridFile {
        GridFile {
            rows: self.ny,
            cols: self.nx,
            x_min: 0.0,
            x_max: self.nx as f64,
            y_min: 0.0,
            y_max: self.ny as f64,
            values: self.blocked.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Union of random axis-aligned rectangles until at least `density` of
    /// the cells are blocked.
    pub fn random_rectangles(nx: usize, ny: usize, density: f64, rng: &mut Stream) -> Result<Self> {
        if !(0.0..0.9).contains(&density) {
            return Err(Error::Config("obstacle density must lie in [0, 0.9)".into()));
        }
        let mut map = Self::free(nx, ny);
        let goal = (density * (nx * ny) as f64).ceil() as usize;
        let mut count = 0;
        while count < goal {
            let w = rng.random_range(2..=12usize).min(nx);
            let h = rng.random_range(2..=12usize).min(ny);
            let x0 = rng.random_range(0..=nx - w);
            let y0 = rng.random_range(0..=ny - h);
            for iy in y0..y0 + h {
                for ix in x0..x0 + w {
                    let c = iy * nx + ix;
                    if !map.blocked[c] {
                        map.blocked[c] = true;
                        count += 1;
                    }
                }
            }
        }
        Ok(map)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn len(&self) -> usize {
        self.blocked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocked.is_empty()
    }

    pub fn is_blocked(&self, c: usize) -> bool {
        self.blocked[c]
    }

    pub fn blocked_count(&self) -> usize {
        self.blocked.iter().filter(|b| **b).count()
    }

    pub fn center(&self, c: usize) -> [f64; 2] {
        [(c % self.nx) as f64 + 0.5, (c / self.nx) as f64 + 0.5]
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == 2 && (0.0..=self.nx as f64).contains(&p[0]) && (0.0..=self.ny as f64).contains(&p[1])
    }

    fn cell_of(&self, p: &[f64]) -> (usize, usize) {
        let ix = (p[0].floor().max(0.0) as usize).min(self.nx - 1);
        let iy = (p[1].floor().max(0.0) as usize).min(self.ny - 1);
        (ix, iy)
    }

    /// Distance from `p` to the nearest blocked cell centre, looking no
    /// further than `radius` (returns infinity beyond that).
    pub fn clearance(&self, p: &[f64], radius: f64) -> f64 {
        let lo_x = ((p[0] - radius - 0.5).floor().max(0.0)) as usize;
        let hi_x = (((p[0] + radius - 0.5).ceil()).max(0.0) as usize).min(self.nx - 1);
        let lo_y = ((p[1] - radius - 0.5).floor().max(0.0)) as usize;
        let hi_y = (((p[1] + radius - 0.5).ceil()).max(0.0) as usize).min(self.ny - 1);
        let mut best = f64::INFINITY;
        for iy in lo_y..=hi_y {
            for ix in lo_x..=hi_x {
                if self.blocked[iy * self.nx + ix] {
                    let d = ((ix as f64 + 0.5 - p[0]).powi(2) + (iy as f64 + 0.5 - p[1]).powi(2)).sqrt();
                    best = best.min(d);
                }
            }
        }
        best
    }

    /// Cells the closed segment `a -> b` passes through, in order.
    pub fn traversed_cells(&self, a: &[f64], b: &[f64]) -> Vec<usize> {
        let mut out = Vec::new();
        self.walk(a, b, |c| {
            out.push(c);
            true
        });
        out
    }

    /// Whether the segment `a -> b` touches no blocked cell.
    pub fn segment_clear(&self, a: &[f64], b: &[f64]) -> bool {
        self.walk(a, b, |c| !self.blocked[c])
    }

    // Grid traversal along the segment; `visit` returns false to stop early.
    // Returns false iff stopped early.
    fn walk(&self, a: &[f64], b: &[f64], mut visit: impl FnMut(usize) -> bool) -> bool {
        let (mut ix, mut iy) = self.cell_of(a);
        let (ex, ey) = self.cell_of(b);
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let step_x: isize = if dx > 0.0 { 1 } else { -1 };
        let step_y: isize = if dy > 0.0 { 1 } else { -1 };
        let next_boundary = |i: usize, s: isize| if s > 0 { (i + 1) as f64 } else { i as f64 };
        let mut t_max_x = if dx != 0.0 { (next_boundary(ix, step_x) - a[0]) / dx } else { f64::INFINITY };
        let mut t_max_y = if dy != 0.0 { (next_boundary(iy, step_y) - a[1]) / dy } else { f64::INFINITY };
        let t_dx = if dx != 0.0 { 1.0 / dx.abs() } else { f64::INFINITY };
        let t_dy = if dy != 0.0 { 1.0 / dy.abs() } else { f64::INFINITY };
        loop {
            if !visit(iy * self.nx + ix) {
                return false;
            }
            if (ix, iy) == (ex, ey) {
                return true;
            }
            // Crossing exactly through a corner touches both neighbours.
            let t = t_max_x.min(t_max_y);
            if t > 1.0 {
                return true;
            }
            let cross_x = t_max_x <= t_max_y;
            let cross_y = t_max_y <= t_max_x;
            if cross_x && cross_y {
                let nx = ix as isize + step_x;
                let ny = iy as isize + step_y;
                for (cx, cy) in [(nx, iy as isize), (ix as isize, ny)] {
                    if (0..self.nx as isize).contains(&cx) && (0..self.ny as isize).contains(&cy) && !visit(cy as usize * self.nx + cx as usize) {
                        return false;
                    }
                }
            }
            if cross_x {
                let nx = ix as isize + step_x;
                if !(0..self.nx as isize).contains(&nx) {
                    return true;
                }
                ix = nx as usize;
                t_max_x += t_dx;
            }
            if cross_y {
                let ny = iy as isize + step_y;
                if !(0..self.ny as isize).contains(&ny) {
                    return true;
                }
                iy = ny as usize;
                t_max_y += t_dy;
            }
        }
    }
}

/// `gamma(q, x) = P / r^2 * (|x - q| - r)^2` inside radius `r`, zero outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductionModel {
    pub peak: f64,
    pub radius: f64,
}

impl Default for ProductionModel {
    fn default() -> Self {
        Self { peak: 17.0, radius: 10.0 }
    }
}

impl ProductionModel {
    pub fn gamma(&self, distance: f64) -> f64 {
        if distance <= self.radius {
            self.peak / (self.radius * self.radius) * (distance - self.radius).powi(2)
        } else {
            0.0
        }
    }
}

/// Coverage one robot at `x` adds to each cell it reaches with line of sight.
pub fn produce_coverage(x: &[f64], obstacles: &ObstacleMap, model: &ProductionModel) -> Vec<(u32, f64)> {
    let (nx, ny) = obstacles.dims();
    let r = model.radius;
    let lo_x = ((x[0] - r - 0.5).floor().max(0.0)) as usize;
    let hi_x = (((x[0] + r - 0.5).ceil()).max(0.0) as usize).min(nx - 1);
    let lo_y = ((x[1] - r - 0.5).floor().max(0.0)) as usize;
    let hi_y = (((x[1] + r - 0.5).ceil()).max(0.0) as usize).min(ny - 1);
    let mut out = Vec::new();
    for iy in lo_y..=hi_y {
        for ix in lo_x..=hi_x {
            let c = iy * nx + ix;
            if obstacles.is_blocked(c) {
                continue;
            }
            let q = obstacles.center(c);
            let d = ((q[0] - x[0]).powi(2) + (q[1] - x[1]).powi(2)).sqrt();
            if d > r {
                continue;
            }
            let g = model.gamma(d);
            if g > 0.0 && obstacles.segment_clear(x, &q) {
                out.push((c as u32, g));
            }
        }
    }
    out
}

/// Coverage levels with per-cell decay.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageField {
    pub z: Vec<f64>,
    pub decay: Vec<f64>,
    pub target: f64,
}

impl CoverageField {
    pub fn uniform(cells: usize, decay: f64, target: f64, initial: f64) -> Result<Self> {
        if !(decay > 0.0 && decay < 1.0) {
            return Err(Error::Config("decay gain must lie in (0, 1)".into()));
        }
        if !(initial >= 0.0) {
            return Err(Error::Config("initial coverage must be non-negative".into()));
        }
        Ok(Self { z: vec![initial; cells], decay: vec![decay; cells], target })
    }

    /// `Z(q) <- d(q) Z(q) + y(q)`.
    pub fn step<'a>(&mut self, production: impl IntoIterator<Item = &'a [(u32, f64)]>) {
        for (z, d) in self.z.iter_mut().zip(&self.decay) {
            *z *= d;
        }
        for footprint in production {
            for &(c, y) in footprint {
                self.z[c as usize] += y;
            }
        }
    }
}

/// `sum over free cells of (Z* - Z)^2`, unit cell area.
pub fn coverage_error(field: &CoverageField, obstacles: &ObstacleMap) -> f64 {
    field
        .z
        .iter()
        .enumerate()
        .filter(|(c, _)| !obstacles.is_blocked(*c))
        .map(|(_, z)| (field.target - z).powi(2))
        .sum()
}

/// Coverage footprint one robot produced in one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageMeasurement {
    pub position: [f64; 2],
    pub production: Vec<(u32, f64)>,
}

#[derive(Debug, Clone)]
pub struct PersistentCoverage {
    obstacles: ObstacleMap,
    field: CoverageField,
    model: ProductionModel,
    safety: f64,
    u_max: f64,
    // Decayed field d * Z(k - 1) the current measurements build on, and its
    // error with no production at all.
    base: Vec<f64>,
    base_error: f64,
}

impl PersistentCoverage {
    pub fn new(obstacles: ObstacleMap, field: CoverageField, model: ProductionModel, safety: f64, u_max: f64) -> Result<Self> {
        if field.z.len() != obstacles.len() {
            return Err(Error::DimensionMismatch { expected: obstacles.len(), got: field.z.len() });
        }
        let mut bed = Self { obstacles, field, model, safety, u_max, base: Vec::new(), base_error: 0.0 };
        bed.refresh_base();
        Ok(bed)
    }

    fn refresh_base(&mut self) {
        self.base = self.field.z.iter().zip(&self.field.decay).map(|(z, d)| z * d).collect();
        self.base_error = self
            .base
            .iter()
            .enumerate()
            .filter(|(c, _)| !self.obstacles.is_blocked(*c))
            .map(|(_, b)| (self.field.target - b).powi(2))
            .sum();
    }

    pub fn obstacles(&self) -> &ObstacleMap {
        &self.obstacles
    }

    pub fn field(&self) -> &CoverageField {
        &self.field
    }

    pub fn position_ok(&self, p: &[f64]) -> bool {
        self.obstacles.contains(p) && self.obstacles.clearance(p, self.safety) >= self.safety
    }

    /// Full single-robot move check: destination in bounds and clear of
    /// obstacles, a traversable straight path, and the motion limit.
    pub fn check_obstacle_constraint(&self, from: &[f64], to: &[f64]) -> bool {
        let step = ((to[0] - from[0]).powi(2) + (to[1] - from[1]).powi(2)).sqrt();
        step <= self.u_max && self.position_ok(to) && self.obstacles.segment_clear(from, to)
    }

    pub fn sample_start(&self, rng: &mut Stream) -> Vec<f64> {
        let (nx, ny) = self.obstacles.dims();
        vec![rng.random::<f64>() * nx as f64, rng.random::<f64>() * ny as f64]
    }

    /// Mean and standard deviation of the coverage level over free cells.
    pub fn coverage_stats(&self) -> (f64, f64) {
        let free: Vec<f64> = self
            .field
            .z
            .iter()
            .enumerate()
            .filter(|(c, _)| !self.obstacles.is_blocked(*c))
            .map(|(_, z)| *z)
            .collect();
        let n = free.len().max(1) as f64;
        let mean = free.iter().sum::<f64>() / n;
        let var = free.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    }
}

impl Testbed for PersistentCoverage {
    type Measurement = CoverageMeasurement;

    fn name(&self) -> &'static str {
        "persistent"
    }

    fn dim(&self) -> usize {
        2
    }

    fn observe(&mut self, _k: usize, robots: &[(RobotId, &[f64])]) -> Result<Vec<CoverageMeasurement>> {
        robots
            .iter()
            .map(|(id, x)| {
                if !self.position_ok(x) {
                    return Err(Error::Domain(format!("robot {id} at {x:?} is inside an obstacle margin or out of bounds")));
                }
                Ok(CoverageMeasurement { position: [x[0], x[1]], production: produce_coverage(x, &self.obstacles, &self.model) })
            })
            .collect()
    }

    fn cost(&self, ys: &[&CoverageMeasurement]) -> f64 {
        let mut added: std::collections::BTreeMap<u32, f64> = std::collections::BTreeMap::new();
        for y in ys {
            for &(c, v) in &y.production {
                *added.entry(c).or_insert(0.0) += v;
            }
        }
        let target = self.field.target;
        let correction: f64 = added
            .iter()
            .map(|(&c, &v)| {
                let b = self.base[c as usize];
                (target - b - v).powi(2) - (target - b).powi(2)
            })
            .sum();
        self.base_error + correction
    }

    fn commit(&mut self, _k: usize, ys: &[&CoverageMeasurement]) {
        self.field.step(ys.iter().map(|y| y.production.as_slice()));
        self.refresh_base();
    }

    fn admits_move(&self, _robot: RobotId, from: &[f64], to: &[f64], _others: &[Neighbor<'_>]) -> bool {
        self.check_obstacle_constraint(from, to)
    }

    fn check_joint(&self, robots: &[(RobotId, &[f64])]) -> std::result::Result<(), String> {
        match robots.iter().find(|(_, x)| !self.position_ok(x)) {
            Some((id, x)) => Err(format!("robot {id} at {x:?} violates the obstacle clearance or bounds")),
            None => Ok(()),
        }
    }

    fn extra_metrics(&self, _robots: &[(RobotId, &[f64])], ys: &[&CoverageMeasurement]) -> Vec<(String, f64)> {
        // Called before `commit`: report the field the cost refers to.
        let mut field = self.field.clone();
        field.step(ys.iter().map(|y| y.production.as_slice()));
        let target = field.target;
        let mut free = 0usize;
        let (mut sum, mut sq, mut all) = (0.0, 0.0, 0.0);
        let mut error = 0.0;
        for (c, z) in field.z.iter().enumerate() {
            all += z;
            if !self.obstacles.is_blocked(c) {
                free += 1;
                sum += z;
                sq += z * z;
                error += (target - z).powi(2);
            }
        }
        let n = free.max(1) as f64;
        let mean = sum / n;
        let std = (sq / n - mean * mean).max(0.0).sqrt();
        vec![
            ("mean_coverage".into(), mean),
            ("coverage_std".into(), std),
            ("coverage_error".into(), error),
            ("mean_coverage_inclusive".into(), all / field.z.len() as f64),
        ]
    }
}
