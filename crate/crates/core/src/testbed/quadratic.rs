//! Synthetic quadratic: robot `i` measures its offset `x_i - c_i` from a
//! private target, and the team cost is `sum ||y_i||^2 + coupling * ||sum y_i||^2`.

use rand::Rng;

use crate::coordinator::{Neighbor, Testbed};
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::RobotId;

#[derive(Debug, Clone)]
pub struct SeparableQuadratic {
    centers: Vec<Vec<f64>>,
    coupling: f64,
    bounds: Option<(f64, f64)>,
}

impl SeparableQuadratic {
    pub fn new(centers: Vec<Vec<f64>>) -> Result<Self> {
        let dim = centers.first().map(Vec::len).ok_or_else(|| Error::Config("no targets".into()))?;
        if dim == 0 || centers.iter().any(|c| c.len() != dim) {
            return Err(Error::Config("targets must share a positive dimension".into()));
        }
        Ok(Self { centers, coupling: 0.0, bounds: None })
    }

    /// Targets drawn uniformly from the unit cube.
    pub fn random(robots: usize, dim: usize, rng: &mut Stream) -> Result<Self> {
        Self::new((0..robots).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect())
    }

    pub fn with_coupling(mut self, coupling: f64) -> Self {
        self.coupling = coupling;
        self
    }

    /// Confines every coordinate to `[lo, hi]`.
    pub fn with_bounds(mut self, lo: f64, hi: f64) -> Self {
        self.bounds = Some((lo, hi));
        self
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn offset_cost(y: &[f64]) -> f64 {
        y.iter().map(|v| v * v).sum()
    }

    fn in_bounds(&self, x: &[f64]) -> bool {
        self.bounds.is_none_or(|(lo, hi)| x.iter().all(|v| (lo..=hi).contains(v)))
    }
}

impl Testbed for SeparableQuadratic {
    type Measurement = Vec<f64>;

    fn name(&self) -> &'static str {
        "synthetic-quadratic"
    }

    fn dim(&self) -> usize {
        self.centers[0].len()
    }

    fn observe(&mut self, _k: usize, robots: &[(RobotId, &[f64])]) -> Result<Vec<Vec<f64>>> {
        robots
            .iter()
            .map(|&(id, x)| {
                let c = self.centers.get(id).ok_or(Error::UnknownRobot(id))?;
                Ok(x.iter().zip(c).map(|(a, b)| a - b).collect())
            })
            .collect()
    }

    fn cost(&self, ys: &[&Vec<f64>]) -> f64 {
        let separable: f64 = ys.iter().map(|y| Self::offset_cost(y)).sum();
        if self.coupling == 0.0 {
            return separable;
        }
        let mut total = vec![0.0; self.dim()];
        for y in ys {
            for (t, v) in total.iter_mut().zip(y.iter()) {
                *t += v;
            }
        }
        separable + self.coupling * Self::offset_cost(&total)
    }

    fn true_cost(&self, robots: &[(RobotId, &[f64])]) -> Option<f64> {
        let mut me = self.clone();
        let ys = me.observe(0, robots).ok()?;
        let refs: Vec<&Vec<f64>> = ys.iter().collect();
        Some(self.cost(&refs))
    }

    fn admits_move(&self, _robot: RobotId, _from: &[f64], to: &[f64], _others: &[Neighbor<'_>]) -> bool {
        self.in_bounds(to)
    }

    fn check_joint(&self, robots: &[(RobotId, &[f64])]) -> std::result::Result<(), String> {
        match robots.iter().find(|(_, x)| !self.in_bounds(x)) {
            Some((id, x)) => Err(format!("robot {id} at {x:?} outside bounds")),
            None => Ok(()),
        }
    }
}
