//! Scenario files.
//!
//! A scenario is a TOML document. Top-level keys select the testbed, mode,
//! team size, horizon and seed; `[optimizer]` overrides the per-testbed agent
//! defaults; one testbed block configures the environment; `[[events]]`
//! schedules faults and target appearances.
//!
//! ```toml
//! testbed = "terrain"
//! mode = "distributed"
//! N = 5
//! iterations = 1000
//! seed = 3
//!
//! [optimizer]
//! T = 40
//! M = 100
//! per_order_counts = [2, 5, 10]
//! alpha = { kind = "constant", base = 0.1 }
//!
//! [[events]]
//! iteration = 330
//! action = "deactivate"
//! robot = 2
//! ```

use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, RegressorConfig, StepSizeSchedule};
use crate::error::{Error, Result};
use crate::linalg::DEFAULT_RCOND;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestbedKind {
    Voronoi,
    Terrain,
    Persistent,
    SyntheticQuadratic,
}

impl TestbedKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Voronoi => "voronoi",
            Self::Terrain => "terrain",
            Self::Persistent => "persistent",
            Self::SyntheticQuadratic => "synthetic-quadratic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Distributed,
    Centralized,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Distributed => "distributed",
            Self::Centralized => "centralized",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distributed" => Ok(Self::Distributed),
            "centralized" => Ok(Self::Centralized),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

/// Agent parameters; anything left out takes the testbed's default.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub perturbations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maxorder: Option<usize>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_order_counts: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinate_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_frame: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rcond: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<StepSizeSchedule>,
}

impl OptimizerConfig {
    fn fill_from(&mut self, d: &OptimizerConfig) {
        macro_rules! fill {
            ($($f:ident),*) => { $( if self.$f.is_none() { self.$f = d.$f.clone(); } )* };
        }
        // An explicit L or maxorder without explicit counts re-derives them.
        if self.per_order_counts.is_none() && (self.size.is_some() || self.maxorder.is_some()) {
            if self.size.is_none() {
                self.size = d.size;
            }
            if self.maxorder.is_none() {
                self.maxorder = d.maxorder;
            }
        } else if let Some(c) = &self.per_order_counts {
            if self.size.is_none() {
                self.size = Some(c.iter().sum::<usize>() + 1);
            }
            if self.maxorder.is_none() {
                self.maxorder = Some(c.len());
            }
        } else {
            fill!(size, maxorder, per_order_counts);
        }
        fill!(window, perturbations, perturbation_scale, warmup, coordinate_scale, local_frame, rcond, alpha);
    }

    /// Agent configuration; every field must be set (see [`ScenarioConfig::resolved`]).
    pub fn agent_config(&self) -> Result<AgentConfig> {
        let need = |name: &str| Error::Config(format!("optimizer.{name} is unresolved"));
        let cfg = AgentConfig {
            window: self.window.ok_or_else(|| need("T"))?,
            perturbations: self.perturbations.ok_or_else(|| need("M"))?,
            regressor: RegressorConfig {
                max_order: self.maxorder.ok_or_else(|| need("maxorder"))?,
                size: self.size.ok_or_else(|| need("L"))?,
                per_order: self.per_order_counts.clone(),
            },
            step: self.alpha.ok_or_else(|| need("alpha"))?,
            perturbation_scale: self.perturbation_scale.ok_or_else(|| need("perturbation_scale"))?,
            warmup: self.warmup.ok_or_else(|| need("warmup"))?,
            rcond: self.rcond.unwrap_or(DEFAULT_RCOND),
            local_frame: self.local_frame.unwrap_or(false),
            coordinate_scale: self.coordinate_scale.unwrap_or(1.0),
        };
        if let Some(c) = &cfg.regressor.per_order {
            if c.len() != cfg.regressor.max_order {
                return Err(Error::Config(format!(
                    "per_order_counts has {} entries for maxorder {}",
                    c.len(),
                    cfg.regressor.max_order
                )));
            }
            if c.iter().sum::<usize>() + 1 != cfg.regressor.size {
                return Err(Error::Config(format!("per_order_counts must sum to L - 1 = {}", cfg.regressor.size - 1)));
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VoronoiInit {
    #[default]
    Random,
    RightHalf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoronoiConfig {
    /// Grid points per side.
    pub resolution: usize,
    /// Gaussians per side (W = this squared).
    pub gaussians_per_side: usize,
    pub sigma: f64,
    pub background: f64,
    pub peak: f64,
    pub init: VoronoiInit,
}

impl Default for VoronoiConfig {
    fn default() -> Self {
        Self { resolution: 15, gaussians_per_side: 7, sigma: 0.02, background: 0.1, peak: 100.0, init: VoronoiInit::Random }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerrainConfig {
    /// Heightmap file; the procedural generator is used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    pub terrain_seed: u64,
    pub x_max: f64,
    pub y_max: f64,
    pub spacing: f64,
    pub max_height: f64,
    pub thres: f64,
    pub noise_gain: f64,
    #[serde(rename = "K")]
    pub k_weight: f64,
    #[serde(rename = "K_t")]
    pub k_target: f64,
    pub d_h: f64,
    pub d_r: f64,
    pub z_max: f64,
    /// Width and depth of the crowded launch area.
    pub launch: [f64; 2],
}

impl Default for TerrainConfig {
    fn default() -> Self {
        Self {
            file: None,
            terrain_seed: 1,
            x_max: 162.0,
            y_max: 84.0,
            spacing: 2.0,
            max_height: 7.2,
            thres: 40.0,
            noise_gain: 1e-3,
            k_weight: 30.0,
            k_target: 1000.0,
            d_h: 0.5,
            d_r: 0.5,
            z_max: 25.0,
            launch: [40.0, 30.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PersistentConfig {
    pub width: usize,
    pub height: usize,
    pub decay: f64,
    pub target: f64,
    pub initial: f64,
    #[serde(rename = "P")]
    pub peak: f64,
    pub r_cov: f64,
    pub u_max: f64,
    /// Clearance `b` from obstacle cell centres.
    pub safety: f64,
    pub obstacle_density: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub obstacle_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub obstacle_seed: Option<u64>,
}

impl Default for PersistentConfig {
    fn default() -> Self {
        Self {
            width: 100,
            height: 150,
            decay: 0.995,
            target: 100.0,
            initial: 0.0,
            peak: 17.0,
            r_cov: 10.0,
            u_max: 5.0,
            safety: 2.5,
            obstacle_density: 0.0,
            obstacle_file: None,
            obstacle_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadraticConfig {
    pub dim: usize,
    pub coupling: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 2]>,
}

impl Default for QuadraticConfig {
    fn default() -> Self {
        Self { dim: 3, coupling: 0.0, bounds: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventAction {
    Deactivate,
    Activate,
    SpawnTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventConfig {
    pub iteration: usize,
    pub action: EventAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robot: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub testbed: TestbedKind,
    #[serde(default)]
    pub mode: Mode,
    #[serde(rename = "N")]
    pub robots: usize,
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads for the agents; the global pool when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voronoi: Option<VoronoiConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terrain: Option<TerrainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persistent: Option<PersistentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadratic: Option<QuadraticConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<EventConfig>,
}

/// Per-testbed agent defaults.
pub fn default_optimizer(testbed: TestbedKind, mode: Mode) -> OptimizerConfig {
    let base = |t, m, maxorder, counts: &[usize], alpha, scale| OptimizerConfig {
        window: Some(t),
        perturbations: Some(m),
        maxorder: Some(maxorder),
        size: Some(counts.iter().sum::<usize>() + 1),
        per_order_counts: Some(counts.to_vec()),
        perturbation_scale: Some(scale),
        warmup: Some(3),
        coordinate_scale: Some(1.0),
        local_frame: Some(false),
        rcond: Some(DEFAULT_RCOND),
        alpha: Some(alpha),
    };
    match (testbed, mode) {
        (TestbedKind::Voronoi, _) => base(30, 100, 3, &[2, 3, 4], StepSizeSchedule::constant(0.01), 1.0),
        (TestbedKind::Terrain, Mode::Distributed) => {
            OptimizerConfig { coordinate_scale: Some(TERRAIN_COORDINATE_SCALE), ..base(40, 100, 3, &[2, 5, 10], StepSizeSchedule::constant(0.1), TERRAIN_PERTURBATION_SCALE) }
        }
        (TestbedKind::Terrain, Mode::Centralized) => {
            OptimizerConfig { coordinate_scale: Some(TERRAIN_COORDINATE_SCALE), ..base(60, 900, 3, &[3, 12, 40], StepSizeSchedule::constant(0.1), TERRAIN_PERTURBATION_SCALE) }
        }
        (TestbedKind::Persistent, _) => base(5, 100, 2, &[2, 2], StepSizeSchedule::constant(1.0), 5.0),
        (TestbedKind::SyntheticQuadratic, _) => OptimizerConfig {
            per_order_counts: None,
            ..base(20, 60, 2, &[3, 6], StepSizeSchedule::decaying(0.1, 0.6), 1.0)
        },
    }
}

/// Perturbation box half-width in metres at `alpha = 1` for the terrain.
pub const TERRAIN_PERTURBATION_SCALE: f64 = 10.0;
/// Terrain coordinates are divided by this before entering the regressor.
pub const TERRAIN_COORDINATE_SCALE: f64 = 100.0;

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("scenario: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize scenario: {e}")))
    }

    /// The same scenario with every default spelled out.
    pub fn resolved(&self) -> Result<Self> {
        let mut out = self.clone();
        let mut defaults = default_optimizer(self.testbed, self.mode);
        if self.testbed == TestbedKind::SyntheticQuadratic {
            // Sized to the decision vector, which grows with N when centralized.
            defaults.size = Some(3 * self.decision_dim() + 1);
        }
        out.optimizer.fill_from(&defaults);
        match self.testbed {
            TestbedKind::Voronoi => {
                out.voronoi.get_or_insert_with(Default::default);
            }
            TestbedKind::Terrain => {
                out.terrain.get_or_insert_with(Default::default);
            }
            TestbedKind::Persistent => {
                out.persistent.get_or_insert_with(Default::default);
            }
            TestbedKind::SyntheticQuadratic => {
                out.quadratic.get_or_insert_with(Default::default);
            }
        }
        out.validate()?;
        Ok(out)
    }

    fn validate(&self) -> Result<()> {
        if self.robots == 0 {
            return Err(Error::Config("N must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        let present = [
            (TestbedKind::Voronoi, self.voronoi.is_some()),
            (TestbedKind::Terrain, self.terrain.is_some()),
            (TestbedKind::Persistent, self.persistent.is_some()),
            (TestbedKind::SyntheticQuadratic, self.quadratic.is_some()),
        ];
        for (kind, there) in present {
            if there && kind != self.testbed {
                return Err(Error::Config(format!("[{}] block given for a {} scenario", kind.as_str(), self.testbed.as_str())));
            }
        }
        let agent = self.optimizer.agent_config()?;
        agent.validate(self.decision_dim())?;
        for e in &self.events {
            if e.iteration >= self.iterations {
                return Err(Error::Config(format!("event at iteration {} is past the horizon", e.iteration)));
            }
            match e.action {
                EventAction::Deactivate | EventAction::Activate => {
                    if self.mode == Mode::Centralized {
                        return Err(Error::Config("robot activation events need distributed mode".into()));
                    }
                    match e.robot {
                        Some(r) if r < self.robots => {}
                        Some(r) => return Err(Error::Config(format!("event names robot {r} of {}", self.robots))),
                        None => return Err(Error::Config("activation events need a robot".into())),
                    }
                }
                EventAction::SpawnTarget => {
                    if self.testbed != TestbedKind::Terrain {
                        return Err(Error::Config("targets exist only on the terrain testbed".into()));
                    }
                    if e.position.as_ref().is_none_or(|p| p.len() != 3) {
                        return Err(Error::Config("spawn_target needs a 3D position".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Decision dimension of a single robot.
    pub fn robot_dim(&self) -> usize {
        match self.testbed {
            TestbedKind::Voronoi | TestbedKind::Persistent => 2,
            TestbedKind::Terrain => 3,
            TestbedKind::SyntheticQuadratic => self.quadratic.as_ref().map_or(QuadraticConfig::default().dim, |q| q.dim),
        }
    }

    /// Length of one agent's decision vector.
    pub fn decision_dim(&self) -> usize {
        self.robot_dim() * if self.mode == Mode::Centralized { self.robots } else { 1 }
    }

    /// Settings that are not taken from the published experiments.
    pub fn assumed_settings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let o = &self.optimizer;
        match self.testbed {
            TestbedKind::Voronoi => {
                out.push("field estimate: batch minimum-norm least squares over all readings".into());
            }
            TestbedKind::Terrain => {
                let t = self.terrain.clone().unwrap_or_default();
                if t.file.is_none() {
                    out.push(format!("procedural terrain (seed {})", t.terrain_seed));
                }
                out.push(format!("thres = {}", t.thres));
                out.push(format!("noise_gain = {}", t.noise_gain));
                if self.events.iter().any(|e| e.action == EventAction::SpawnTarget) {
                    out.push(format!("K_t = {}", t.k_target));
                }
                out.push(format!("launch area = {:?}", t.launch));
            }
            TestbedKind::Persistent => {
                let p = self.persistent.clone().unwrap_or_default();
                out.push(format!("initial coverage = {}", p.initial));
            }
            TestbedKind::SyntheticQuadratic => {}
        }
        if let Some(s) = o.perturbation_scale {
            out.push(format!("perturbation_scale = {s}"));
        }
        if let Some(c) = o.coordinate_scale.filter(|c| *c != 1.0) {
            out.push(format!("coordinate_scale = {c}"));
        }
        out.push(format!("warmup = {}", o.warmup.unwrap_or(3)));
        out
    }
}
