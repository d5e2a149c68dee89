use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::regressor::RegressorSpec;
use crate::error::{Error, Result};
use crate::linalg::lstsq_min_norm;

/// Bounded chronological buffer of `(decision, subcost)` pairs, newest last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorWindow {
    capacity: usize,
    samples: VecDeque<(Vec<f64>, f64)>,
}

impl EstimatorWindow {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "window capacity must be positive");
        Self { capacity, samples: VecDeque::with_capacity(capacity) }
    }

    pub fn push(&mut self, decision: Vec<f64>, subcost: f64) {
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back((decision, subcost));
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.samples.iter().map(|(x, j)| (x.as_slice(), *j))
    }
}

/// Design matrix and targets for the window under a coordinate map.
pub(crate) fn design<F>(window: &EstimatorWindow, spec: &RegressorSpec, map: F) -> Result<(DMatrix<f64>, DVector<f64>)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let rows = window.len();
    let cols = spec.len();
    let mut a = DMatrix::zeros(rows, cols);
    let mut b = DVector::zeros(rows);
    let mut u = vec![0.0; spec.dim()];
    let mut phi = vec![0.0; cols];
    for (r, (x, j)) in window.iter().enumerate() {
        if x.len() != spec.dim() {
            return Err(Error::DimensionMismatch { expected: spec.dim(), got: x.len() });
        }
        map(x, &mut u);
        spec.eval_into(&u, &mut phi)?;
        for (c, &v) in phi.iter().enumerate() {
            a[(r, c)] = v;
        }
        b[r] = j;
    }
    Ok((a, b))
}

/// Least-squares parameters of `theta^T phi(x) ~ J` over the window.
///
/// Underdetermined windows yield the minimum-norm solution; singular values
/// below `rcond * sigma_max` are discarded.
pub fn fit_estimator(window: &EstimatorWindow, spec: &RegressorSpec, rcond: f64) -> Result<Vec<f64>> {
    fit_in_frame(window, spec, rcond, |x, u| u.copy_from_slice(x))
}

pub(crate) fn fit_in_frame<F>(window: &EstimatorWindow, spec: &RegressorSpec, rcond: f64, map: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    if window.is_empty() {
        return Err(Error::EstimatorNotReady);
    }
    let (a, b) = design(window, spec, map)?;
    Ok(lstsq_min_norm(&a, &b, rcond)?.iter().copied().collect())
}

/// Sum of squared fit residuals of `theta` over the window.
pub fn window_residual(window: &EstimatorWindow, spec: &RegressorSpec, theta: &[f64]) -> Result<f64> {
    let (a, b) = design(window, spec, |x, u| u.copy_from_slice(x))?;
    let t = DVector::from_column_slice(theta);
    Ok(crate::linalg::residual_sq(&a, &t, &b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DEFAULT_RCOND;
    use crate::rng::substream;
    use rand::Rng;

    #[test]
    fn eviction_keeps_newest() {
        let mut w = EstimatorWindow::new(3);
        for i in 0..5 {
            w.push(vec![i as f64], i as f64);
        }
        let js: Vec<f64> = w.iter().map(|(_, j)| j).collect();
        assert_eq!(js, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn empty_window_not_ready() {
        let w = EstimatorWindow::new(4);
        let spec = RegressorSpec::constant(1);
        assert!(matches!(fit_estimator(&w, &spec, DEFAULT_RCOND), Err(Error::EstimatorNotReady)));
    }

    #[test]
    fn constant_only_single_sample() {
        let mut w = EstimatorWindow::new(4);
        w.push(vec![0.3, -2.0], 7.25);
        let theta = fit_estimator(&w, &RegressorSpec::constant(2), DEFAULT_RCOND).unwrap();
        assert_eq!(theta.len(), 1);
        assert!((theta[0] - 7.25).abs() < 1e-12);
    }

    #[test]
    fn recovers_exact_polynomial() {
        let mut rng = substream(5, "t", 0, 0);
        let spec = RegressorSpec::from_table(2, vec![vec![0], vec![1], vec![0, 0], vec![0, 1], vec![1, 1]]).unwrap();
        let truth = [0.5, -1.0, 2.0, 3.0, -0.25, 1.5];
        let mut w = EstimatorWindow::new(20);
        for _ in 0..20 {
            let x = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let phi = spec.eval(&x).unwrap();
            let j: f64 = phi.iter().zip(truth).map(|(p, t)| p * t).sum();
            w.push(x, j);
        }
        let theta = fit_estimator(&w, &spec, DEFAULT_RCOND).unwrap();
        for (a, b) in theta.iter().zip(truth) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        assert!(window_residual(&w, &spec, &theta).unwrap() < 1e-20);
    }
}
