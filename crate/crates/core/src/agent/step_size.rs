use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step-size law `alpha(k)`.
///
/// `Decaying` is `base / (1 + k)^p` with `p` in `(0.5, 1]`, which diverges in
/// sum and converges in squared sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StepSizeSchedule {
    Constant { base: f64 },
    Decaying { base: f64, #[serde(default = "default_power")] p: f64 },
}

fn default_power() -> f64 {
    0.6
}

impl StepSizeSchedule {
    pub fn constant(base: f64) -> Self {
        Self::Constant { base }
    }

    pub fn decaying(base: f64, p: f64) -> Self {
        Self::Decaying { base, p }
    }

    pub fn validate(&self) -> Result<()> {
        let base = self.cap();
        if !(base.is_finite() && base > 0.0) {
            return Err(Error::Config(format!("step size base must be positive, got {base}")));
        }
        if let Self::Decaying { p, .. } = *self {
            if !(p > 0.5 && p <= 1.0) {
                return Err(Error::Config(format!("decay power must lie in (0.5, 1], got {p}")));
            }
        }
        Ok(())
    }

    /// Upper bound on every `alpha(k)`.
    pub fn cap(&self) -> f64 {
        match *self {
            Self::Constant { base } | Self::Decaying { base, .. } => base,
        }
    }

    pub fn alpha(&self, k: usize) -> f64 {
        match *self {
            Self::Constant { base } => base,
            Self::Decaying { base, p } => base / (1.0 + k as f64).powf(p),
        }
    }
}

impl Default for StepSizeSchedule {
    fn default() -> Self {
        Self::Constant { base: 0.1 }
    }
}
