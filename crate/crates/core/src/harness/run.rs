//! Single seeded runs.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use crate::agent::Agent;
use crate::coordinator::{Swarm, Testbed, TestbedEvent};
use crate::error::{Error, Result};
use crate::testbed::Centralized;

use super::build::{build_persistent, build_quadratic, build_terrain, build_voronoi, Built};
use super::config::{EventAction, Mode, ScenarioConfig, TestbedKind};

/// Everything observed in one iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    pub global_cost: f64,
    pub true_cost: Option<f64>,
    /// Per agent: its discrepancy, or `None` while inactive.
    pub deltas: Vec<Option<f64>>,
    /// Per physical robot: the position executed at `k`.
    pub positions: Vec<Vec<f64>>,
    /// Per physical robot.
    pub active: Vec<bool>,
    pub extras: Vec<(String, f64)>,
    /// Per agent decision wall time in seconds (zero while inactive). Not
    /// deterministic, never written to the metrics file.
    #[serde(skip)]
    pub decision_seconds: Vec<f64>,
}

impl IterationRecord {
    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    pub fn extra(&self, name: &str) -> Option<f64> {
        self.extras.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub testbed: String,
    pub mode: String,
    pub robots: usize,
    pub iterations: usize,
    pub seed: u64,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub sum_cost: f64,
    pub final_true_cost: Option<f64>,
    pub wall_seconds: f64,
    pub mean_decision_seconds: f64,
    pub constraint_violations: usize,
    pub assumed_settings: Vec<String>,
}

/// In-memory result of a run; see [`super::output`] for the file layout.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub config: ScenarioConfig,
    pub records: Vec<IterationRecord>,
    pub final_positions: Vec<Vec<f64>>,
    pub landmarks: Vec<Vec<f64>>,
    pub summary: RunSummary,
    pub agents: Vec<Agent>,
}

impl RunArtifacts {
    pub fn costs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.global_cost).collect()
    }
}

/// Runs a scenario to completion.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunArtifacts> {
    let cfg = config.resolved()?;
    match cfg.testbed {
        TestbedKind::SyntheticQuadratic => execute(&cfg, build_quadratic(&cfg)?),
        TestbedKind::Voronoi => execute(&cfg, build_voronoi(&cfg)?),
        TestbedKind::Terrain => execute(&cfg, build_terrain(&cfg)?),
        TestbedKind::Persistent => execute(&cfg, build_persistent(&cfg)?),
    }
}

fn execute<T: Testbed>(cfg: &ScenarioConfig, built: Built<T>) -> Result<RunArtifacts> {
    let agent_cfg = cfg.optimizer.agent_config()?;
    let n = built.testbed.dim();
    match cfg.mode {
        Mode::Distributed => {
            let agents = built
                .starts
                .iter()
                .enumerate()
                .map(|(i, x)| Agent::new(i, x.clone(), agent_cfg.clone(), cfg.seed))
                .collect::<Result<Vec<_>>>()?;
            let swarm = Swarm::new(built.testbed, agents)?;
            drive(cfg, swarm, built.landmarks, |joint| joint.to_vec())
        }
        Mode::Centralized => {
            let joint: Vec<f64> = built.starts.concat();
            let agent = Agent::new(0, joint, agent_cfg, cfg.seed)?;
            let swarm = Swarm::new(Centralized::new(built.testbed, cfg.robots), vec![agent])?;
            drive(cfg, swarm, built.landmarks, |joint| joint[0].chunks(n).map(<[f64]>::to_vec).collect())
        }
    }
}

fn drive<T, F>(cfg: &ScenarioConfig, swarm: Swarm<T>, landmarks: Vec<Vec<f64>>, split: F) -> Result<RunArtifacts>
where
    T: Testbed,
    F: Fn(&[Vec<f64>]) -> Vec<Vec<f64>>,
{
    let mut swarm = match cfg.threads {
        Some(t) => swarm.with_threads(t)?,
        None => swarm,
    };
    let mut events: BTreeMap<usize, Vec<_>> = BTreeMap::new();
    for e in &cfg.events {
        events.entry(e.iteration).or_default().push(e.clone());
    }
    let agents_n = swarm.agents().len();
    let mut robot_active = vec![true; cfg.robots];
    let mut records = Vec::with_capacity(cfg.iterations);
    let mut executed: Vec<Vec<(usize, Vec<f64>)>> = Vec::with_capacity(cfg.iterations + 1);
    let started = Instant::now();
    for k in 0..cfg.iterations {
        for e in events.get(&k).into_iter().flatten() {
            match e.action {
                EventAction::Deactivate | EventAction::Activate => {
                    let robot = e.robot.ok_or_else(|| Error::Config("activation event without robot".into()))?;
                    let on = e.action == EventAction::Activate;
                    swarm.set_robot_active(robot, on)?;
                    robot_active[robot] = on;
                    log::info!("k={k}: robot {robot} {}", if on { "activated" } else { "deactivated" });
                }
                EventAction::SpawnTarget => {
                    let position = e.position.clone().ok_or_else(|| Error::Config("spawn_target without position".into()))?;
                    swarm.apply_testbed_event(&TestbedEvent::SpawnTarget { position })?;
                    log::info!("k={k}: target spawned");
                }
            }
        }
        let joint: Vec<Vec<f64>> = swarm.agents().iter().map(|a| a.decision().as_slice().to_vec()).collect();
        let positions = split(&joint);
        executed.push(swarm.active_ids().into_iter().map(|i| (i, joint[i].clone())).collect());
        let report = swarm.run_iteration()?;
        let deltas = (0..agents_n).map(|i| report.deltas.get(&i).copied()).collect();
        let decision_seconds = (0..agents_n).map(|i| report.decision_seconds.get(&i).copied().unwrap_or(0.0)).collect();
        log::debug!("k={k} cost={}", report.global_cost);
        records.push(IterationRecord {
            k,
            global_cost: report.global_cost,
            true_cost: report.true_cost,
            deltas,
            positions,
            active: robot_active.clone(),
            extras: report.extras,
            decision_seconds,
        });
    }
    let wall_seconds = started.elapsed().as_secs_f64();
    swarm.audit()?;

    let final_joint: Vec<Vec<f64>> = swarm.agents().iter().map(|a| a.decision().as_slice().to_vec()).collect();
    executed.push(swarm.active_ids().into_iter().map(|i| (i, final_joint[i].clone())).collect());
    let constraint_violations = post_hoc_violations(swarm.testbed(), &executed);
    let final_positions = split(&final_joint);
    let (_, agents) = swarm.into_parts();
    let costs: Vec<f64> = records.iter().map(|r| r.global_cost).collect();
    let timed: Vec<f64> = records.iter().flat_map(|r| r.decision_seconds.iter().copied()).filter(|s| *s > 0.0).collect();
    let summary = RunSummary {
        testbed: cfg.testbed.as_str().into(),
        mode: cfg.mode.as_str().into(),
        robots: cfg.robots,
        iterations: cfg.iterations,
        seed: cfg.seed,
        initial_cost: costs[0],
        final_cost: *costs.last().expect("at least one iteration"),
        sum_cost: costs.iter().sum(),
        final_true_cost: records.last().and_then(|r| r.true_cost),
        wall_seconds,
        mean_decision_seconds: if timed.is_empty() { 0.0 } else { timed.iter().sum::<f64>() / timed.len() as f64 },
        constraint_violations,
        assumed_settings: cfg.assumed_settings(),
    };
    Ok(RunArtifacts { config: cfg.clone(), records, final_positions, landmarks, summary, agents })
}

/// Re-checks every configuration the swarm occupied, independently of the
/// checks made while running; returns how many fail.
fn post_hoc_violations<T: Testbed>(testbed: &T, executed: &[Vec<(usize, Vec<f64>)>]) -> usize {
    executed
        .iter()
        .filter(|joint| {
            let refs: Vec<(usize, &[f64])> = joint.iter().map(|(i, x)| (*i, x.as_slice())).collect();
            match testbed.check_joint(&refs) {
                Ok(()) => false,
                Err(detail) => {
                    log::error!("post-hoc audit: {detail}");
                    true
                }
            }
        })
        .count()
}
