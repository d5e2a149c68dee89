//! Randomised monomial regressor.
//!
//! The regressor vector is a leading constant followed by `L - 1` monomials.
//! Order `j` contributes `L_j` monomials, each the product of `j` coordinates
//! picked uniformly at random (with repetition). The table is drawn once and
//! frozen: the estimator's parameters only make sense against a fixed basis.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of multisets of size `k` over `n` symbols, `C(n + k - 1, k)`.
pub fn multiset_count(n: usize, k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * (n + i - 1) as f64 / i as f64)
}

/// Per-order monomial counts obtained by scaling the multiset counts so that
/// they sum to `size - 1`, rounding each to the nearest integer.
///
/// When independent rounding does not land exactly on `size - 1`, the
/// remaining units go to (or come from) the orders with the largest
/// (smallest) fractional parts, so the sum invariant always holds.
pub fn scaled_order_counts(n: usize, max_order: usize, size: usize) -> Vec<usize> {
    let raw: Vec<f64> = (1..=max_order).map(|k| multiset_count(n, k)).collect();
    let total: f64 = raw.iter().sum();
    let scale = (size - 1) as f64 / total;
    let exact: Vec<f64> = raw.iter().map(|c| c * scale).collect();
    let mut counts: Vec<usize> = exact.iter().map(|v| v.round() as usize).collect();

    let target = size - 1;
    let mut sum: usize = counts.iter().sum();
    if sum != target {
        // Rank orders by how far rounding moved them.
        let mut order: Vec<usize> = (0..max_order).collect();
        if sum < target {
            order.sort_by(|&a, &b| {
                let ra = exact[a] - counts[a] as f64;
                let rb = exact[b] - counts[b] as f64;
                rb.total_cmp(&ra).then(a.cmp(&b))
            });
            for &o in order.iter().cycle() {
                if sum == target {
                    break;
                }
                counts[o] += 1;
                sum += 1;
            }
        } else {
            order.sort_by(|&a, &b| {
                let ra = exact[a] - counts[a] as f64;
                let rb = exact[b] - counts[b] as f64;
                ra.total_cmp(&rb).then(a.cmp(&b))
            });
            let mut i = 0;
            while sum > target {
                let o = order[i % max_order];
                if counts[o] > 0 {
                    counts[o] -= 1;
                    sum -= 1;
                }
                i += 1;
            }
        }
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    dim: usize,
    max_order: usize,
    per_order_counts: Vec<usize>,
    /// Zero-based coordinate indices of each monomial, constant term excluded.
    monomials: Vec<Vec<usize>>,
}

impl RegressorSpec {
    /// Draws a monomial table. `per_order` overrides the scaled counts.
    pub fn build<R: Rng + ?Sized>(
        dim: usize,
        max_order: usize,
        size: usize,
        per_order: Option<&[usize]>,
        rng: &mut R,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidRegressor("decision dimension must be positive".into()));
        }
        if max_order == 0 {
            return Err(Error::InvalidRegressor("maxorder must be at least 1".into()));
        }
        if size < 2 {
            return Err(Error::InvalidRegressor(format!(
                "L = {size} leaves no room for any monomial beyond the constant"
            )));
        }
        if size < 2 * dim {
            log::warn!("regressor size L = {size} is below 2n = {}", 2 * dim);
        }
        let counts = match per_order {
            Some(c) => {
                if c.len() != max_order {
                    return Err(Error::InvalidRegressor(format!(
                        "{} per-order counts supplied for maxorder {max_order}",
                        c.len()
                    )));
                }
                let s: usize = c.iter().sum();
                if s != size - 1 {
                    return Err(Error::InvalidRegressor(format!(
                        "per-order counts sum to {s}, expected L - 1 = {}",
                        size - 1
                    )));
                }
                c.to_vec()
            }
            None => scaled_order_counts(dim, max_order, size),
        };
        let mut monomials = Vec::with_capacity(size - 1);
        for (j, &count) in counts.iter().enumerate() {
            let order = j + 1;
            for _ in 0..count {
                monomials.push((0..order).map(|_| rng.random_range(0..dim)).collect());
            }
        }
        Ok(Self { dim, max_order, per_order_counts: counts, monomials })
    }

    /// A spec from an explicit table; order of each monomial is its length.
    pub fn from_table(dim: usize, monomials: Vec<Vec<usize>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidRegressor("decision dimension must be positive".into()));
        }
        let max_order = monomials.iter().map(Vec::len).max().unwrap_or(0);
        if monomials.iter().any(|m| m.is_empty()) {
            return Err(Error::InvalidRegressor("empty monomial".into()));
        }
        if let Some(bad) = monomials.iter().flatten().find(|&&v| v >= dim) {
            return Err(Error::InvalidRegressor(format!("variable index {bad} out of range for n = {dim}")));
        }
        let mut per_order_counts = vec![0; max_order];
        for m in &monomials {
            per_order_counts[m.len() - 1] += 1;
        }
        Ok(Self { dim, max_order, per_order_counts, monomials })
    }

    /// Constant-only regressor (`L = 1`).
    pub fn constant(dim: usize) -> Self {
        Self { dim, max_order: 0, per_order_counts: Vec::new(), monomials: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn per_order_counts(&self) -> &[usize] {
        &self.per_order_counts
    }

    pub fn monomials(&self) -> &[Vec<usize>] {
        &self.monomials
    }

    /// Total regressor length `L`, constant included.
    pub fn len(&self) -> usize {
        self.monomials.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Writes `phi(x)` into `out` (length `L`).
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if out.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: out.len() });
        }
        out[0] = 1.0;
        for (slot, m) in out[1..].iter_mut().zip(&self.monomials) {
            *slot = m.iter().fold(1.0, |g, &r| g * x[r]);
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }
}
