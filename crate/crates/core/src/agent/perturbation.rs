//! Candidate generation and greedy selection.

use rand::Rng;

use super::regressor::RegressorSpec;
use crate::error::Result;

/// Number of raw draws allowed per requested candidate before giving up.
pub const REJECTION_FACTOR: usize = 50;

/// Draws up to `count` perturbations uniformly from `[-1, 1]^n`, keeping those
/// for which `admits(x + step * delta)` holds.
///
/// At most `REJECTION_FACTOR * count` draws are made; the returned set may be
/// shorter than `count`, and empty when the neighbourhood is fully blocked.
pub fn generate_valid_perturbations<R, F>(
    rng: &mut R,
    x: &[f64],
    step: f64,
    count: usize,
    mut admits: F,
) -> Vec<Vec<f64>>
where
    R: Rng + ?Sized,
    F: FnMut(&[f64]) -> bool,
{
    let n = x.len();
    let mut out = Vec::with_capacity(count);
    let mut candidate = vec![0.0; n];
    for _ in 0..REJECTION_FACTOR * count {
        if out.len() == count {
            break;
        }
        let delta: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        for ((c, xi), d) in candidate.iter_mut().zip(x).zip(&delta) {
            *c = xi + step * d;
        }
        if admits(&candidate) {
            out.push(delta);
        }
    }
    out
}

/// Index of the candidate minimising `theta^T phi(x + step * delta)`.
///
/// Ties resolve to the lowest index; non-finite scores never win.
pub fn select_candidate(
    theta: &[f64],
    spec: &RegressorSpec,
    x: &[f64],
    candidates: &[Vec<f64>],
    step: f64,
) -> Result<Option<usize>> {
    let mut phi = vec![0.0; spec.len()];
    let mut point = vec![0.0; x.len()];
    let mut best: Option<(usize, f64)> = None;
    for (j, delta) in candidates.iter().enumerate() {
        for ((p, xi), d) in point.iter_mut().zip(x).zip(delta) {
            *p = xi + step * d;
        }
        spec.eval_into(&point, &mut phi)?;
        let score: f64 = theta.iter().zip(&phi).map(|(t, p)| t * p).sum();
        let score = if score.is_finite() { score } else { f64::INFINITY };
        match best {
            Some((_, s)) if score >= s => {}
            _ => best = Some((j, score)),
        }
    }
    Ok(best.map(|(j, _)| j))
}

/// `x + step * delta`.
pub fn apply_step(x: &[f64], delta: &[f64], step: f64) -> Vec<f64> {
    x.iter().zip(delta).map(|(xi, d)| xi + step * d).collect()
}

/// Selects the best candidate and returns the next decision, or `None` when
/// there are no candidates.
pub fn select_and_step(
    theta: &[f64],
    spec: &RegressorSpec,
    x: &[f64],
    candidates: &[Vec<f64>],
    step: f64,
) -> Result<Option<Vec<f64>>> {
    Ok(select_candidate(theta, spec, x, candidates, step)?.map(|j| apply_step(x, &candidates[j], step)))
}
