//! Centralized baseline: one agent owns the concatenation of every robot's
//! decision vector. With a single agent the discrepancy collapses to
//! `J_k - J_{k-1}`.

use crate::coordinator::{Neighbor, Testbed, TestbedEvent};
use crate::error::{Error, Result};
use crate::RobotId;

#[derive(Debug, Clone)]
pub struct Centralized<T> {
    inner: T,
    robots: usize,
}

impl<T: Testbed> Centralized<T> {
    pub fn new(inner: T, robots: usize) -> Self {
        Self { inner, robots }
    }

    pub fn inner(&self) -> &T {
        &self.inner
    }

    pub fn robots(&self) -> usize {
        self.robots
    }

    /// Splits a joint decision into per-robot slices.
    pub fn split<'a>(&self, joint: &'a [f64]) -> Vec<(RobotId, &'a [f64])> {
        joint.chunks(self.inner.dim()).enumerate().collect()
    }
}

impl<T: Testbed> Testbed for Centralized<T> {
    type Measurement = Vec<T::Measurement>;

    fn name(&self) -> &'static str {
        self.inner.name()
    }

    fn dim(&self) -> usize {
        self.inner.dim() * self.robots
    }

    fn observe(&mut self, k: usize, robots: &[(RobotId, &[f64])]) -> Result<Vec<Self::Measurement>> {
        let [(_, joint)] = robots else {
            return Err(Error::Protocol(format!("centralized mode drives one agent, got {}", robots.len())));
        };
        let parts: Vec<(RobotId, &[f64])> = joint.chunks(self.inner.dim()).enumerate().collect();
        Ok(vec![self.inner.observe(k, &parts)?])
    }

    fn cost(&self, ys: &[&Self::Measurement]) -> f64 {
        let flat: Vec<&T::Measurement> = ys.iter().flat_map(|v| v.iter()).collect();
        self.inner.cost(&flat)
    }

    fn commit(&mut self, k: usize, ys: &[&Self::Measurement]) {
        let flat: Vec<&T::Measurement> = ys.iter().flat_map(|v| v.iter()).collect();
        self.inner.commit(k, &flat);
    }

    fn true_cost(&self, robots: &[(RobotId, &[f64])]) -> Option<f64> {
        let (_, joint) = robots.first()?;
        self.inner.true_cost(&self.split(joint))
    }

    fn admits_move(&self, _robot: RobotId, from: &[f64], to: &[f64], _others: &[Neighbor<'_>]) -> bool {
        let n = self.inner.dim();
        let from: Vec<&[f64]> = from.chunks(n).collect();
        let to: Vec<&[f64]> = to.chunks(n).collect();
        (0..self.robots).all(|i| {
            let others: Vec<Neighbor<'_>> = (0..self.robots)
                .filter(|&j| j != i)
                .map(|j| Neighbor { id: j, x: to[j], max_step: 0.0 })
                .collect();
            self.inner.admits_move(i, from[i], to[i], &others)
        })
    }

    fn check_joint(&self, robots: &[(RobotId, &[f64])]) -> std::result::Result<(), String> {
        match robots {
            [(_, joint)] => self.inner.check_joint(&self.split(joint)),
            _ => Err(format!("centralized mode expects one agent, got {}", robots.len())),
        }
    }

    fn extra_metrics(&self, robots: &[(RobotId, &[f64])], ys: &[&Self::Measurement]) -> Vec<(String, f64)> {
        let Some((_, joint)) = robots.first() else { return Vec::new() };
        let flat: Vec<&T::Measurement> = ys.iter().flat_map(|v| v.iter()).collect();
        self.inner.extra_metrics(&self.split(joint), &flat)
    }

    fn apply_event(&mut self, k: usize, event: &TestbedEvent) -> Result<()> {
        self.inner.apply_event(k, event)
    }
}
