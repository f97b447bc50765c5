use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Power-law tolerance sequence `eps_k = c * k^(-alpha / n)`.
///
/// Any sequence bounded below by such a law (for some constant) anneals to the
/// posterior; `alpha = 0` gives a frozen tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplicitSchedule {
    pub c: f64,
    pub alpha: f64,
    pub n: usize,
}

impl ExplicitSchedule {
    pub fn new(c: f64, alpha: f64, n: usize) -> Result<Self> {
        if !(c > 0.0) || alpha < 0.0 || n == 0 {
            return Err(Error::InvalidArgument(format!(
                "explicit schedule needs c > 0, alpha >= 0, n >= 1 (got c={c}, alpha={alpha}, n={n})"
            )));
        }
        Ok(Self { c, alpha, n })
    }

    pub fn frozen(eps: f64) -> Result<Self> {
        Self::new(eps, 0.0, 1)
    }

    pub fn epsilon(&self, k: u64) -> f64 {
        explicit_epsilon(self, k)
    }
}

pub fn explicit_epsilon(sched: &ExplicitSchedule, k: u64) -> f64 {
    let k = k.max(1) as f64;
    sched.c * k.powf(-sched.alpha / sched.n as f64)
}
