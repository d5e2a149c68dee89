//! Turns a resolved scenario into a testbed and feasible starting positions.

use crate::coordinator::Testbed;
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};
use crate::testbed::persistent::{CoverageField, ObstacleMap, PersistentCoverage, ProductionModel};
use crate::testbed::quadratic::SeparableQuadratic;
use crate::testbed::terrain::{FlightLimits, SensorModel, Terrain, TerrainSurveillance};
use crate::testbed::voronoi::{GridEnvironment, InitMode, SensoryField, VoronoiCoverage};
use crate::testbed::GridFile;

use super::config::{ScenarioConfig, VoronoiInit};

/// Draws per robot before a scenario is declared infeasible.
pub const MAX_START_ATTEMPTS: usize = 1000;

/// A testbed ready to run, its starting positions, and points of interest
/// (field peaks, target centres) for reporting.
pub struct Built<T> {
    pub testbed: T,
    pub starts: Vec<Vec<f64>>,
    pub landmarks: Vec<Vec<f64>>,
}

/// Samples robot starts one at a time, redrawing a robot until the joint
/// configuration so far passes the testbed's audit.
pub fn sample_starts<T, F>(testbed: &T, robots: usize, seed: u64, mut draw: F) -> Result<Vec<Vec<f64>>>
where
    T: Testbed,
    F: FnMut(&mut Stream) -> Vec<f64>,
{
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(robots);
    for r in 0..robots {
        let mut accepted = None;
        for attempt in 0..MAX_START_ATTEMPTS {
            let mut rng = substream(seed, "init", r as u64, attempt as u64);
            let candidate = draw(&mut rng);
            let mut joint: Vec<(usize, &[f64])> = starts.iter().enumerate().map(|(i, x)| (i, x.as_slice())).collect();
            joint.push((r, &candidate));
            if testbed.check_joint(&joint).is_ok() {
                accepted = Some(candidate);
                break;
            }
        }
        starts.push(accepted.ok_or_else(|| {
            Error::Config(format!("no feasible start for robot {r} after {MAX_START_ATTEMPTS} draws"))
        })?);
    }
    Ok(starts)
}

fn settings<T: Clone + Default>(block: &Option<T>) -> T {
    block.clone().unwrap_or_default()
}

pub fn build_quadratic(cfg: &ScenarioConfig) -> Result<Built<SeparableQuadratic>> {
    let q = settings(&cfg.quadratic);
    let mut rng = substream(cfg.seed, "targets", 0, 0);
    let mut bed = SeparableQuadratic::random(cfg.robots, q.dim, &mut rng)?.with_coupling(q.coupling);
    if let Some([lo, hi]) = q.bounds {
        bed = bed.with_bounds(lo, hi);
    }
    let (lo, hi) = q.bounds.map_or((0.0, 1.0), |[lo, hi]| (lo, hi));
    let starts = sample_starts(&bed, cfg.robots, cfg.seed, |rng| {
        (0..q.dim).map(|_| lo + (hi - lo) * rand::Rng::random::<f64>(rng)).collect()
    })?;
    let landmarks = bed.centers().to_vec();
    Ok(Built { testbed: bed, starts, landmarks })
}

pub fn build_voronoi(cfg: &ScenarioConfig) -> Result<Built<VoronoiCoverage>> {
    let v = settings(&cfg.voronoi);
    let mut rng = substream(cfg.seed, "field", 0, 0);
    let (field, peaks) = SensoryField::two_peaks(v.gaussians_per_side, v.sigma, v.background, v.peak, &mut rng)?;
    let bed = VoronoiCoverage::new(GridEnvironment::uniform(v.resolution), field, peaks.to_vec());
    let mode = match v.init {
        VoronoiInit::Random => InitMode::Random,
        VoronoiInit::RightHalf => InitMode::RightHalf,
    };
    let starts = sample_starts(&bed, cfg.robots, cfg.seed, |rng| VoronoiCoverage::initial_position(mode, rng))?;
    let landmarks = bed.peak_positions().iter().map(|p| p.to_vec()).collect();
    Ok(Built { testbed: bed, starts, landmarks })
}

pub fn load_terrain(cfg: &ScenarioConfig) -> Result<Terrain> {
    let t = settings(&cfg.terrain);
    match &t.file {
        Some(path) => Terrain::new(GridFile::load(std::path::Path::new(path))?),
        None => Terrain::procedural(t.terrain_seed, [0.0, t.x_max, 0.0, t.y_max], t.spacing, t.max_height),
    }
}

pub fn build_terrain(cfg: &ScenarioConfig) -> Result<Built<TerrainSurveillance>> {
    let t = settings(&cfg.terrain);
    let terrain = load_terrain(cfg)?;
    let sensor = SensorModel { thres: t.thres, noise_gain: t.noise_gain };
    let limits = FlightLimits { d_h: t.d_h, d_r: t.d_r, z_max: t.z_max };
    if terrain.max_height() + limits.d_h > limits.z_max {
        return Err(Error::Config("terrain peaks leave no room below z_max".into()));
    }
    let mut rng = substream(cfg.seed, "launch", 0, 0);
    let bed = TerrainSurveillance::new(terrain, sensor, limits, t.k_weight, t.k_target, cfg.seed)
        .with_random_launch_area(t.launch[0], t.launch[1], &mut rng);
    let starts = sample_starts(&bed, cfg.robots, cfg.seed, |rng| bed.sample_start(rng))?;
    let landmarks = cfg.events.iter().filter_map(|e| e.position.clone()).collect();
    Ok(Built { testbed: bed, starts, landmarks })
}

pub fn build_persistent(cfg: &ScenarioConfig) -> Result<Built<PersistentCoverage>> {
    let p = settings(&cfg.persistent);
    let obstacles = match &p.obstacle_file {
        Some(path) => ObstacleMap::from_grid_file(&GridFile::load(std::path::Path::new(path))?)?,
        None if p.obstacle_density > 0.0 => {
            let seed = p.obstacle_seed.unwrap_or(cfg.seed);
            ObstacleMap::random_rectangles(p.width, p.height, p.obstacle_density, &mut substream(seed, "obstacles", 0, 0))?
        }
        None => ObstacleMap::free(p.width, p.height),
    };
    let field = CoverageField::uniform(obstacles.len(), p.decay, p.target, p.initial)?;
    let model = ProductionModel { peak: p.peak, radius: p.r_cov };
    let bed = PersistentCoverage::new(obstacles, field, model, p.safety, p.u_max)?;
    let starts = sample_starts(&bed, cfg.robots, cfg.seed, |rng| bed.sample_start(rng))?;
    Ok(Built { testbed: bed, starts, landmarks: Vec::new() })
}
