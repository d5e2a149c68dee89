//! Global coordination: measurement gathering, global cost, per-robot
//! discrepancies, and the synchronous iteration barrier.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, DecisionVector, StepKind};
use crate::error::{Error, Result};
use crate::RobotId;

/// Another robot as seen by a constraint check: where it is now and how far
/// it may move before the next barrier.
#[derive(Debug, Clone, Copy)]
pub struct Neighbor<'a> {
    pub id: RobotId,
    pub x: &'a [f64],
    pub max_step: f64,
}

/// An environment the swarm acts on.
///
/// The coordinator only ever sees measurements and decisions through this
/// interface; agents only ever see their discrepancy and `admits_move`.
pub trait Testbed: Send + Sync {
    type Measurement: Clone + Send + Sync;

    fn name(&self) -> &'static str;

    /// Decision dimension `n` of one robot.
    fn dim(&self) -> usize;

    /// Executes the decisions of the listed robots at iteration `k` and returns
    /// one measurement per robot, in the same order.
    fn observe(&mut self, k: usize, robots: &[(RobotId, &[f64])]) -> Result<Vec<Self::Measurement>>;

    /// Global cost `J(y_1, ..., y_N)` of one measurement per active robot.
    fn cost(&self, ys: &[&Self::Measurement]) -> f64;

    /// Advances any internal state once the iteration's costs are known.
    fn commit(&mut self, _k: usize, _ys: &[&Self::Measurement]) {}

    /// Ground-truth or noise-free counterpart of the cost, for reporting only.
    fn true_cost(&self, _robots: &[(RobotId, &[f64])]) -> Option<f64> {
        None
    }

    /// Whether `robot` may move from `from` to `to` with the others held.
    fn admits_move(&self, robot: RobotId, from: &[f64], to: &[f64], others: &[Neighbor<'_>]) -> bool;

    /// Post-hoc audit of a joint configuration (all robots, active or not).
    fn check_joint(&self, robots: &[(RobotId, &[f64])]) -> std::result::Result<(), String>;

    /// Extra per-iteration metrics, emitted as named columns.
    fn extra_metrics(&self, _robots: &[(RobotId, &[f64])], _ys: &[&Self::Measurement]) -> Vec<(String, f64)> {
        Vec::new()
    }

    /// Applies a scheduled testbed-level event (e.g. a target appearing).
    fn apply_event(&mut self, _k: usize, event: &TestbedEvent) -> Result<()> {
        Err(Error::Config(format!("{} does not support event {event:?}", self.name())))
    }
}

/// Testbed-level scheduled events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TestbedEvent {
    SpawnTarget { position: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord<M> {
    pub robot: RobotId,
    pub k: usize,
    pub y: M,
    pub x_executed: DecisionVector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub k: usize,
    pub global_cost: f64,
    pub true_cost: Option<f64>,
    pub deltas: BTreeMap<RobotId, f64>,
    pub active: Vec<RobotId>,
    pub step_kinds: BTreeMap<RobotId, StepKind>,
    /// Wall time of each agent's decision step, seconds. Not deterministic.
    #[serde(skip)]
    pub decision_seconds: BTreeMap<RobotId, f64>,
    pub extras: Vec<(String, f64)>,
}

/// Cost of one record per active robot; fails if any active robot lacks one.
pub fn compute_global_cost<T: Testbed>(
    testbed: &T,
    active: &[RobotId],
    records: &[MeasurementRecord<T::Measurement>],
) -> Result<f64> {
    let ys = ordered_measurements(active, records)?;
    Ok(testbed.cost(&ys))
}

fn ordered_measurements<'a, M>(active: &[RobotId], records: &'a [MeasurementRecord<M>]) -> Result<Vec<&'a M>> {
    if records.len() != active.len() {
        return Err(Error::Protocol(format!(
            "{} measurements gathered for {} active robots",
            records.len(),
            active.len()
        )));
    }
    active
        .iter()
        .map(|id| {
            records
                .iter()
                .find(|r| r.robot == *id)
                .map(|r| &r.y)
                .ok_or_else(|| Error::Protocol(format!("missing measurement for robot {id}")))
        })
        .collect()
}

/// `J(y(k)) - J(y_1(k), ..., y_i(k-1), ..., y_N(k))`.
///
/// A robot without a previous record (it just joined) gets zero.
pub fn compute_discrepancy<T: Testbed>(
    testbed: &T,
    global_cost: f64,
    current: &[&T::Measurement],
    slot: usize,
    previous: Option<&T::Measurement>,
) -> f64 {
    match previous {
        None => 0.0,
        Some(prev) => {
            let mut ys = current.to_vec();
            ys[slot] = prev;
            global_cost - testbed.cost(&ys)
        }
    }
}

/// A running swarm: testbed, agents, and the previous iteration's records.
pub struct Swarm<T: Testbed> {
    testbed: T,
    agents: Vec<Agent>,
    k: usize,
    previous: BTreeMap<RobotId, MeasurementRecord<T::Measurement>>,
    pool: Option<rayon::ThreadPool>,
}

impl<T: Testbed> Swarm<T> {
    /// Agents must be indexed by their id (`agents[i].id() == i`).
    pub fn new(testbed: T, agents: Vec<Agent>) -> Result<Self> {
        for (i, a) in agents.iter().enumerate() {
            if a.id() != i {
                return Err(Error::Config(format!("agent at slot {i} has id {}", a.id())));
            }
            if a.decision().len() != testbed.dim() {
                return Err(Error::DimensionMismatch { expected: testbed.dim(), got: a.decision().len() });
            }
        }
        Ok(Self { testbed, agents, k: 0, previous: BTreeMap::new(), pool: None })
    }

    /// Runs agent decisions on a dedicated pool of `threads` workers.
    pub fn with_threads(mut self, threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        self.pool = Some(pool);
        Ok(self)
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn testbed(&self) -> &T {
        &self.testbed
    }

    pub fn testbed_mut(&mut self) -> &mut T {
        &mut self.testbed
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn decisions(&self) -> Vec<(RobotId, &[f64])> {
        self.agents.iter().map(|a| (a.id(), a.decision().as_slice())).collect()
    }

    pub fn active_ids(&self) -> Vec<RobotId> {
        self.agents.iter().filter(|a| a.is_active()).map(Agent::id).collect()
    }

    pub fn previous_record(&self, robot: RobotId) -> Option<&MeasurementRecord<T::Measurement>> {
        self.previous.get(&robot)
    }

    /// Turns a robot off or back on. A deactivated robot stops measuring and
    /// receives no discrepancy; a reactivated one re-enters with a zero
    /// discrepancy and a subcost reset to the global cost at that iteration.
    pub fn set_robot_active(&mut self, robot: RobotId, active: bool) -> Result<()> {
        let agent = self.agents.get_mut(robot).ok_or(Error::UnknownRobot(robot))?;
        agent.set_active(active);
        if !active {
            self.previous.remove(&robot);
        }
        Ok(())
    }

    /// One synchronous round: measure, cost, discrepancies, agent decisions.
    pub fn run_iteration(&mut self) -> Result<CostReport> {
        let k = self.k;
        let active = self.active_ids();
        if active.is_empty() {
            return Err(Error::NoActiveRobots);
        }

        let all = self.decisions();
        self.testbed
            .check_joint(&all)
            .map_err(|detail| Error::ConstraintViolation { k, detail })?;

        let executed: Vec<(RobotId, Vec<f64>)> = active
            .iter()
            .map(|&id| (id, self.agents[id].decision().as_slice().to_vec()))
            .collect();
        let exec_refs: Vec<(RobotId, &[f64])> = executed.iter().map(|(id, x)| (*id, x.as_slice())).collect();
        let testbed = &mut self.testbed;
        let ys = match &self.pool {
            Some(pool) => pool.install(|| testbed.observe(k, &exec_refs))?,
            None => testbed.observe(k, &exec_refs)?,
        };
        if ys.len() != active.len() {
            return Err(Error::Protocol(format!("testbed returned {} measurements for {} robots", ys.len(), active.len())));
        }
        let records: Vec<MeasurementRecord<T::Measurement>> = executed
            .into_iter()
            .zip(ys)
            .map(|((robot, x), y)| MeasurementRecord { robot, k, y, x_executed: DecisionVector::new(x).expect("finite decisions") })
            .collect();

        let testbed = &self.testbed;
        let previous = &self.previous;
        let (global_cost, deltas) = self.install(|| -> Result<(f64, Vec<f64>)> {
            let current = ordered_measurements(&active, &records)?;
            let global_cost = testbed.cost(&current);
            let deltas = active
                .par_iter()
                .enumerate()
                .map(|(slot, id)| {
                    compute_discrepancy(testbed, global_cost, &current, slot, previous.get(id).map(|r| &r.y))
                })
                .collect();
            Ok((global_cost, deltas))
        })?;
        if !global_cost.is_finite() {
            return Err(Error::NonFinite("global cost"));
        }

        let exec_refs: Vec<(RobotId, &[f64])> = records.iter().map(|r| (r.robot, r.x_executed.as_slice())).collect();
        let true_cost = self.testbed.true_cost(&exec_refs);
        let ys_refs: Vec<&T::Measurement> = records.iter().map(|r| &r.y).collect();
        let extras = self.testbed.extra_metrics(&exec_refs, &ys_refs);
        self.testbed.commit(k, &ys_refs);

        for &id in &active {
            if !self.previous.contains_key(&id) {
                self.agents[id].join(global_cost);
            }
        }

        // Decisions: every active agent in parallel against a frozen snapshot.
        let steps: Vec<f64> = self
            .agents
            .iter()
            .map(|a| if a.is_active() { a.config().step_at(k) * (a.decision().len() as f64).sqrt() } else { 0.0 })
            .collect();
        let positions: Vec<Vec<f64>> = self.agents.iter().map(|a| a.decision().as_slice().to_vec()).collect();
        let delta_of: BTreeMap<RobotId, f64> = active.iter().copied().zip(deltas.iter().copied()).collect();
        let testbed = &self.testbed;
        let agents = &mut self.agents;
        let outcomes: Vec<Result<(RobotId, StepKind, f64)>> = match &self.pool {
            Some(pool) => pool.install(|| decide_all(agents, testbed, &delta_of, &positions, &steps, k)),
            None => decide_all(agents, testbed, &delta_of, &positions, &steps, k),
        };
        let mut step_kinds = BTreeMap::new();
        let mut decision_seconds = BTreeMap::new();
        for o in outcomes {
            let (id, kind, secs) = o?;
            step_kinds.insert(id, kind);
            decision_seconds.insert(id, secs);
        }

        self.previous = records.into_iter().map(|r| (r.robot, r)).collect();
        self.k += 1;
        Ok(CostReport {
            k,
            global_cost,
            true_cost,
            deltas: delta_of,
            active,
            step_kinds,
            decision_seconds,
            extras,
        })
    }

    /// Audits the current joint configuration.
    pub fn audit(&self) -> Result<()> {
        self.testbed
            .check_joint(&self.decisions())
            .map_err(|detail| Error::ConstraintViolation { k: self.k, detail })
    }

    pub fn apply_testbed_event(&mut self, event: &TestbedEvent) -> Result<()> {
        self.testbed.apply_event(self.k, event)
    }

    pub fn into_parts(self) -> (T, Vec<Agent>) {
        (self.testbed, self.agents)
    }

    fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(pool) => pool.install(f),
            None => f(),
        }
    }
}

fn decide_all<T: Testbed>(
    agents: &mut [Agent],
    testbed: &T,
    deltas: &BTreeMap<RobotId, f64>,
    positions: &[Vec<f64>],
    steps: &[f64],
    k: usize,
) -> Vec<Result<(RobotId, StepKind, f64)>> {
    agents
        .par_iter_mut()
        .filter(|a| a.is_active())
        .map(|agent| {
            let id = agent.id();
            let others: Vec<Neighbor<'_>> = positions
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != id)
                .map(|(j, x)| Neighbor { id: j, x, max_step: steps[j] })
                .collect();
            let from = positions[id].as_slice();
            let delta = deltas.get(&id).copied().unwrap_or(0.0);
            let start = Instant::now();
            let out = agent.iterate(delta, k, |to| testbed.admits_move(id, from, to, &others))?;
            Ok((id, out.kind, start.elapsed().as_secs_f64()))
        })
        .collect()
}
