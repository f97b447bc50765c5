//! Distances to the data and the energy transform `u = G(rho)`.
//!
//! `G` is the distribution function of the distance under the joint prior, so
//! prior energies are uniform on `[0, 1]` and the mean energy of the tempered
//! target is close to its temperature.

use std::io::Write;

use crate::error::{Error, Result};

/// `(1/alpha) * sum |x_i - y_i|^alpha`.
pub fn rho(x: &[f64], y: &[f64], alpha: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: x.len(),
        });
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let sum: f64 = if alpha == 2.0 {
        x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
    } else {
        x.iter()
            .zip(y)
            .map(|(a, b)| (a - b).abs().powf(alpha))
            .sum()
    };
    Ok(sum / alpha)
}

/// Exponent of the small-distance power law `G(rho) ~ rho^(n/alpha)`.
///
/// A ball `{x : rho(x, y) <= r}` has volume proportional to `r^(n/alpha)`, and
/// for small `r` the prior predictive density is roughly constant on it.
pub fn tail_exponent(n: usize, alpha: f64) -> f64 {
    n as f64 / alpha
}

/// Piecewise-linear distribution function of prior distances with a
/// power-law left tail.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyCdf {
    knots: Vec<f64>,
    values: Vec<f64>,
    tail_exponent: f64,
}

impl EnergyCdf {
    /// Fits `G` from prior distances of an `n`-dimensional output under the
    /// distance exponent `alpha`.
    pub fn fit(prior_rhos: &[f64], n: usize, alpha: f64) -> Result<Self> {
        Self::fit_with_exponent(prior_rhos, tail_exponent(n, alpha))
    }

    pub fn fit_with_floor(prior_rhos: &[f64], n: usize, alpha: f64, floor: usize) -> Result<Self> {
        if prior_rhos.len() < floor {
            return Err(Error::TooFewSamples {
                needed: floor,
                got: prior_rhos.len(),
            });
        }
        Self::fit(prior_rhos, n, alpha)
    }

    pub fn fit_with_exponent(prior_rhos: &[f64], tail_exponent: f64) -> Result<Self> {
        if prior_rhos.is_empty() {
            return Err(Error::Empty("prior distances"));
        }
        if prior_rhos.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(Error::InvalidArgument(
                "prior distances must be finite and non-negative".into(),
            ));
        }
        if !(tail_exponent > 0.0) {
            return Err(Error::InvalidArgument(
                "tail exponent must be positive".into(),
            ));
        }
        let mut sorted = prior_rhos.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let m = sorted.len() as f64;
        let mut knots = Vec::new();
        let mut values = Vec::new();
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i;
            while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            // tied order statistics i..=j (0-based) share their mid-rank
            let mid_rank = (i + j) as f64 / 2.0 + 1.0;
            knots.push(sorted[i]);
            values.push((mid_rank - 0.5) / m);
            i = j + 1;
        }
        *values.last_mut().unwrap() = 1.0;
        Ok(Self {
            knots,
            values,
            tail_exponent,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail_exponent(&self) -> f64 {
        self.tail_exponent
    }

    /// `u = G(rho)`, monotone and clamped to `[0, 1]`.
    pub fn energy(&self, rho: f64) -> f64 {
        let first = self.knots[0];
        if rho.is_nan() {
            return 1.0;
        }
        if rho < first {
            if rho <= 0.0 {
                return 0.0;
            }
            return self.values[0] * (rho / first).powf(self.tail_exponent);
        }
        let last = *self.knots.last().unwrap();
        if rho >= last {
            return 1.0;
        }
        let k = self.knots.partition_point(|&x| x <= rho);
        let (x0, x1) = (self.knots[k - 1], self.knots[k]);
        let (g0, g1) = (self.values[k - 1], self.values[k]);
        (g0 + (g1 - g0) * (rho - x0) / (x1 - x0)).clamp(0.0, 1.0)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["knot", "cdf"])?;
        for (k, v) in self.knots.iter().zip(&self.values) {
            w.write_record([k.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Free-function form of [`EnergyCdf::energy`].
pub fn energy(g: &EnergyCdf, rho: f64) -> f64 {
    g.energy(rho)
}

/// Free-function form of [`EnergyCdf::fit`].
pub fn fit_energy_cdf(prior_rhos: &[f64], n: usize, alpha: f64) -> Result<EnergyCdf> {
    EnergyCdf::fit(prior_rhos, n, alpha)
}
