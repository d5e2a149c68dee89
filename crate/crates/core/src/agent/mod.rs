//! Per-robot decision engine.
//!
//! Each iteration an agent receives one scalar, its discrepancy, folds it into
//! its running subcost, refits a polynomial estimator of that subcost over a
//! sliding window of its own past decisions, scores a batch of constraint-valid
//! random moves on the estimator and takes the best one. It never sees other
//! robots' decisions or measurements; the only outside input besides the
//! discrepancy is a yes/no constraint oracle.

mod perturbation;
mod regressor;
mod step_size;
mod window;

pub use perturbation::{
    apply_step, generate_valid_perturbations, select_and_step, select_candidate, REJECTION_FACTOR,
};
pub use regressor::{multiset_count, scaled_order_counts, RegressorSpec};
pub use step_size::StepSizeSchedule;
pub use window::{fit_estimator, window_residual, EstimatorWindow};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DEFAULT_RCOND;
use crate::rng::{substream, Stream};
use crate::RobotId;

/// One robot's controllable parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecisionVector(Vec<f64>);

impl DecisionVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().all(|v| v.is_finite()) {
            Ok(Self(values))
        } else {
            Err(Error::NonFinite("decision vector"))
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for DecisionVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorConfig {
    pub max_order: usize,
    /// Total regressor length `L`, constant included.
    pub size: usize,
    pub per_order: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    /// Least-squares window `T`.
    pub window: usize,
    /// Candidate perturbations per iteration `M`.
    pub perturbations: usize,
    pub regressor: RegressorConfig,
    pub step: StepSizeSchedule,
    /// Half-width of the perturbation box before scaling by `alpha(k)`.
    pub perturbation_scale: f64,
    /// Iterations of pure random exploration before the estimator is used.
    pub warmup: usize,
    pub rcond: f64,
    /// Fit in coordinates centred on the current decision and scaled by the
    /// step box. Off by default: with a randomly drawn monomial set, some
    /// coordinate often has no linear term, and a centred frame then cannot
    /// see the gradient along it at all.
    #[serde(default)]
    pub local_frame: bool,
    /// Raw decisions are divided by this before evaluating the regressor
    /// (ignored in the local frame). Scaling without centring keeps the
    /// polynomial span and only improves conditioning.
    #[serde(default = "unit_scale")]
    pub coordinate_scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            window: 30,
            perturbations: 100,
            regressor: RegressorConfig { max_order: 2, size: 10, per_order: None },
            step: StepSizeSchedule::default(),
            perturbation_scale: 1.0,
            warmup: 3,
            rcond: DEFAULT_RCOND,
            local_frame: false,
            coordinate_scale: 1.0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config("window T must be positive".into()));
        }
        if self.perturbations == 0 {
            return Err(Error::Config("perturbation count M must be positive".into()));
        }
        if self.perturbations < 2 * dim {
            log::warn!("M = {} is below 2n = {}", self.perturbations, 2 * dim);
        }
        if !(self.perturbation_scale.is_finite() && self.perturbation_scale > 0.0) {
            return Err(Error::Config("perturbation_scale must be positive".into()));
        }
        if !(self.coordinate_scale.is_finite() && self.coordinate_scale > 0.0) {
            return Err(Error::Config("coordinate_scale must be positive".into()));
        }
        if !(self.rcond.is_finite() && self.rcond >= 0.0) {
            return Err(Error::Config("rcond must be non-negative".into()));
        }
        self.step.validate()
    }

    /// Largest per-coordinate move at iteration `k`.
    pub fn step_at(&self, k: usize) -> f64 {
        self.step.alpha(k) * self.perturbation_scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepKind {
    /// Random valid move while the window fills up.
    Warmup,
    /// Best candidate on the fitted estimator.
    Guided,
    /// No valid candidate found; position held.
    Stuck,
    Inactive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next: DecisionVector,
    pub kind: StepKind,
    pub candidates: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Agent {
    id: RobotId,
    x: DecisionVector,
    subcost: Option<f64>,
    window: EstimatorWindow,
    theta: Vec<f64>,
    spec: RegressorSpec,
    rng: Stream,
    config: AgentConfig,
    active: bool,
}

impl Agent {
    /// Builds an agent whose monomial table and perturbation stream derive
    /// from `master_seed` and its id.
    pub fn new(id: RobotId, x0: Vec<f64>, config: AgentConfig, master_seed: u64) -> Result<Self> {
        let dim = x0.len();
        config.validate(dim)?;
        let mut spec_rng = substream(master_seed, "regressor", id as u64, 0);
        let r = &config.regressor;
        let spec = RegressorSpec::build(dim, r.max_order, r.size, r.per_order.as_deref(), &mut spec_rng)?;
        Self::with_spec(id, x0, config, spec, substream(master_seed, "agent", id as u64, 0))
    }

    pub fn with_spec(id: RobotId, x0: Vec<f64>, config: AgentConfig, spec: RegressorSpec, rng: Stream) -> Result<Self> {
        if spec.dim() != x0.len() {
            return Err(Error::DimensionMismatch { expected: spec.dim(), got: x0.len() });
        }
        let theta = vec![0.0; spec.len()];
        Ok(Self {
            id,
            x: DecisionVector::new(x0)?,
            subcost: None,
            window: EstimatorWindow::new(config.window),
            theta,
            spec,
            rng,
            config,
            active: true,
        })
    }

    pub fn id(&self) -> RobotId {
        self.id
    }

    pub fn decision(&self) -> &DecisionVector {
        &self.x
    }

    pub fn subcost(&self) -> Option<f64> {
        self.subcost
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn spec(&self) -> &RegressorSpec {
        &self.spec
    }

    pub fn window(&self) -> &EstimatorWindow {
        &self.window
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    pub fn has_joined(&self) -> bool {
        self.subcost.is_some()
    }

    pub fn set_active(&mut self, active: bool) {
        if self.active && !active {
            self.subcost = None;
        }
        self.active = active;
    }

    /// Starts (or restarts) the subcost at the current global cost. The
    /// sample window is cleared since earlier subcosts used another offset.
    pub fn join(&mut self, global_cost: f64) {
        self.subcost = Some(global_cost);
        self.window.clear();
    }

    /// One full decision step at iteration `k`.
    ///
    /// `admits` answers whether the robot may move to a candidate decision
    /// with every other robot held where it currently is.
    pub fn iterate<F>(&mut self, delta: f64, k: usize, admits: F) -> Result<StepOutcome>
    where
        F: FnMut(&[f64]) -> bool,
    {
        if !self.active {
            return Ok(StepOutcome { next: self.x.clone(), kind: StepKind::Inactive, candidates: 0 });
        }
        if !delta.is_finite() {
            return Err(Error::NonFinite("discrepancy"));
        }
        let subcost = self
            .subcost
            .ok_or_else(|| Error::Protocol(format!("agent {} iterated before joining", self.id)))?
            + delta;
        self.subcost = Some(subcost);
        self.window.push(self.x.as_slice().to_vec(), subcost);

        let step = self.config.step_at(k);
        let candidates =
            generate_valid_perturbations(&mut self.rng, &self.x, step, self.config.perturbations, admits);
        let count = candidates.len();
        if candidates.is_empty() {
            return Ok(StepOutcome { next: self.x.clone(), kind: StepKind::Stuck, candidates: 0 });
        }

        let (chosen, kind) = if self.window.len() < self.config.warmup {
            (0, StepKind::Warmup)
        } else {
            (self.guided_choice(&candidates, step)?, StepKind::Guided)
        };
        let next = DecisionVector::new(apply_step(&self.x, &candidates[chosen], step))?;
        self.x = next.clone();
        Ok(StepOutcome { next, kind, candidates: count })
    }

    fn guided_choice(&mut self, candidates: &[Vec<f64>], step: f64) -> Result<usize> {
        let dim = self.spec.dim();
        let choice = if self.config.local_frame {
            let center = self.x.as_slice().to_vec();
            let inv = 1.0 / step;
            self.theta = window::fit_in_frame(&self.window, &self.spec, self.config.rcond, |x, u| {
                for ((ui, xi), ci) in u.iter_mut().zip(x).zip(&center) {
                    *ui = (xi - ci) * inv;
                }
            })?;
            // In this frame a candidate sits exactly at its perturbation.
            select_candidate(&self.theta, &self.spec, &vec![0.0; dim], candidates, 1.0)?
        } else {
            let inv = 1.0 / self.config.coordinate_scale;
            self.theta = window::fit_in_frame(&self.window, &self.spec, self.config.rcond, |x, u| {
                for (ui, xi) in u.iter_mut().zip(x) {
                    *ui = xi * inv;
                }
            })?;
            let u: Vec<f64> = self.x.iter().map(|v| v * inv).collect();
            select_candidate(&self.theta, &self.spec, &u, candidates, step * inv)?
        };
        Ok(choice.unwrap_or(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_config(alpha: f64) -> AgentConfig {
        AgentConfig {
            window: 20,
            perturbations: 60,
            regressor: RegressorConfig { max_order: 2, size: 10, per_order: None },
            step: StepSizeSchedule::constant(alpha),
            ..AgentConfig::default()
        }
    }

    #[test]
    fn inactive_agent_holds() {
        let mut a = Agent::new(0, vec![0.5, 0.5], quad_config(0.1), 1).unwrap();
        a.join(1.0);
        a.set_active(false);
        let out = a.iterate(3.0, 0, |_| true).unwrap();
        assert_eq!(out.kind, StepKind::Inactive);
        assert_eq!(out.next.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn iterate_before_join_is_protocol_error() {
        let mut a = Agent::new(0, vec![0.0], quad_config(0.1), 1).unwrap();
        assert!(matches!(a.iterate(0.0, 0, |_| true), Err(Error::Protocol(_))));
    }

    #[test]
    fn subcost_telescopes() {
        let mut a = Agent::new(0, vec![0.0, 0.0], quad_config(0.1), 3).unwrap();
        a.join(10.0);
        let deltas = [0.0, 0.5, -1.25, 2.0, 1e-3];
        for (k, d) in deltas.iter().enumerate() {
            a.iterate(*d, k, |_| true).unwrap();
        }
        let sum: f64 = deltas.iter().sum();
        assert!((a.subcost().unwrap() - (10.0 + sum)).abs() < 1e-12);
    }

    #[test]
    fn constrained_stuck_holds_position() {
        let mut a = Agent::new(0, vec![0.2, 0.2], quad_config(0.1), 4).unwrap();
        a.join(0.0);
        let out = a.iterate(0.0, 0, |_| false).unwrap();
        assert_eq!(out.kind, StepKind::Stuck);
        assert_eq!(out.next.as_slice(), &[0.2, 0.2]);
    }

    #[test]
    fn single_agent_descends_quadratic() {
        let target = [0.3, -0.4, 0.8];
        let cost = |x: &[f64]| x.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let mut cfg = quad_config(0.1);
        cfg.step = StepSizeSchedule::decaying(0.1, 0.6);
        let mut a = Agent::new(0, vec![0.0, 0.0, 0.0], cfg, 15).unwrap();
        let mut prev = cost(a.decision());
        a.join(prev);
        let mut delta = 0.0;
        for k in 0..200 {
            a.iterate(delta, k, |_| true).unwrap();
            let c = cost(a.decision());
            delta = c - prev;
            prev = c;
        }
        let d = cost(a.decision()).sqrt();
        assert!(d < 0.1, "final distance {d}");
    }

    #[test]
    fn serde_round_trip_preserves_future() {
        let mut a = Agent::new(2, vec![0.1, 0.2], quad_config(0.1), 5).unwrap();
        a.join(1.0);
        for k in 0..5 {
            a.iterate(0.1 * k as f64, k, |_| true).unwrap();
        }
        let json = serde_json::to_string(&a).unwrap();
        let mut b: Agent = serde_json::from_str(&json).unwrap();
        let na = a.iterate(0.3, 5, |_| true).unwrap();
        let nb = b.iterate(0.3, 5, |_| true).unwrap();
        assert_eq!(na.next, nb.next);
    }
}
