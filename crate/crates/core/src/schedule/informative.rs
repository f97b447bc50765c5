//! Two-temperature control for informative priors.
//!
//! The ensemble is summarised by the mean distance `U1` and mean prior
//! potential `U2`; their conjugate intensities are `(eps1, eps2)` in the
//! family `f(x|theta) exp(-rho/eps1 - (1 + eps2) nu)`. Fluxes respond linearly
//! to the forces `F = (1/eps1 - 1/eps1_e, eps2 - eps2_e)` through the Onsager
//! matrix `L`, and the control keeps `F^T L F = v`.

use nalgebra::{Matrix2, Vector2};
use rand::Rng;

use crate::ensemble::{ess, Ensemble, PriorSample};
use crate::error::{Error, Result};
use crate::kernel::{log_jump_density, JumpCov};
use crate::rng::RngStream;

/// Snapshot of the informative control state.
#[derive(Clone, Debug, PartialEq)]
pub struct InfoScheduleState {
    pub u: Vector2<f64>,
    /// Intensities describing the ensemble.
    pub eps: Vector2<f64>,
    /// Intensities used by the kernel.
    pub eps_e: Vector2<f64>,
    pub onsager: Matrix2<f64>,
    pub jacobi: Matrix2<f64>,
    pub v: f64,
    pub a: f64,
}

impl InfoScheduleState {
    pub fn force(&self) -> Vector2<f64> {
        force(self.eps, self.eps_e)
    }
}

/// `F = (1/eps1 - 1/eps1_e, eps2 - eps2_e)`.
pub fn force(eps: Vector2<f64>, eps_e: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(1.0 / eps[0] - 1.0 / eps_e[0], eps[1] - eps_e[1])
}

/// `dU/d eps` for the exponential family, from ensemble variances.
pub fn jacobi_matrix(var_rho: f64, cov_rho_nu: f64, var_nu: f64, eps1: f64) -> Matrix2<f64> {
    let s = 1.0 / (eps1 * eps1);
    Matrix2::new(var_rho * s, -cov_rho_nu, cov_rho_nu * s, -var_nu)
}

/// `eps_old + J^{-1} dU`.
pub fn update_intensities(
    eps_old: Vector2<f64>,
    du: Vector2<f64>,
    jac: &Matrix2<f64>,
) -> Result<Vector2<f64>> {
    let det = jac.determinant();
    let scale = (jac[(0, 0)] * jac[(1, 1)]).abs() + (jac[(0, 1)] * jac[(1, 0)]).abs();
    if !(det.abs() > 1e-12 * scale) || !det.is_finite() {
        return Err(Error::SingularJacobian(det.abs()));
    }
    let inv = jac
        .try_inverse()
        .ok_or(Error::SingularJacobian(det.abs()))?;
    Ok(eps_old + inv * du)
}

/// Prior-sample estimate of `(E[rho], E[nu])` under intensities `eps`.
///
/// The prior sample already carries one factor `exp(-nu)`, so each record is
/// weighted by `exp(-rho/eps1 - eps2 nu)`. Fails with
/// [`Error::PriorSampleExhausted`] when the weights have fewer than
/// `ess_floor` effective records.
pub fn calibrate_u_of_eps(
    p: &PriorSample,
    eps: Vector2<f64>,
    ess_floor: f64,
) -> Result<Vector2<f64>> {
    if p.is_empty() {
        return Err(Error::Empty("prior sample"));
    }
    if !(eps[0] > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps1 must be positive, got {}",
            eps[0]
        )));
    }
    let logw: Vec<f64> = p
        .records
        .iter()
        .map(|r| -r.rho / eps[0] - eps[1] * r.nu)
        .collect();
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::PriorSampleExhausted {
            ess: 0.0,
            floor: ess_floor,
        });
    }
    let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let n_eff = ess(&w)?;
    if n_eff < ess_floor {
        return Err(Error::PriorSampleExhausted {
            ess: n_eff,
            floor: ess_floor,
        });
    }
    let total: f64 = w.iter().sum();
    let (mut u1, mut u2) = (0.0, 0.0);
    for (r, wi) in p.records.iter().zip(&w) {
        u1 += wi * r.rho;
        u2 += wi * r.nu;
    }
    Ok(Vector2::new(u1 / total, u2 / total))
}

#[inline]
fn onsager_term(
    (rho, nu): (f64, f64),
    (rho2, nu2): (f64, f64),
    eps: Vector2<f64>,
) -> Option<(f64, f64)> {
    let d_rho = rho - rho2;
    let d_nu = nu - nu2;
    if !(d_rho / eps[0] + (1.0 + eps[1]) * d_nu >= 0.0) {
        return None;
    }
    Some((d_rho, d_nu))
}

fn finish_onsager(acc: [f64; 3], total_weight: f64) -> Result<Matrix2<f64>> {
    if !(total_weight > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    let m = Matrix2::new(acc[0], acc[1], acc[1], acc[2]) / total_weight;
    let ridge = 1e-12 * m.trace();
    Ok(m + Matrix2::identity() * ridge)
}

/// Monte Carlo estimate of the Onsager matrix.
///
/// Ensemble members play the role of the equilibrium state `z`; prior-sample
/// records stand in for the proposed state `z'`, reweighted by
/// `k(theta, theta') / f(theta')` so that `theta'` follows the jump kernel.
/// Up to `pairs` `(z, z')` pairs are drawn at random; when `pairs` covers the
/// whole product the exact double sum over both samples is returned.
pub fn estimate_onsager(
    e: &Ensemble,
    p: &PriorSample,
    k: &JumpCov,
    eps: Vector2<f64>,
    pairs: usize,
    rng: &mut RngStream,
) -> Result<Matrix2<f64>> {
    if e.is_empty() {
        return Err(Error::Empty("ensemble"));
    }
    if p.is_empty() {
        return Err(Error::Empty("prior sample"));
    }
    let mut acc = [0.0; 3];
    let mut count = 0usize;
    let mut weight_sum = 0.0;
    let mut visit = |i: usize, j: usize, acc: &mut [f64; 3]| {
        let z = &e.particles[i];
        let r = &p.records[j];
        count += 1;
        let w = (log_jump_density(k, &z.theta, &r.theta) + r.nu).exp();
        weight_sum += w;
        if let Some((dr, dn)) = onsager_term((z.rho, z.nu), (r.rho, r.nu), eps) {
            acc[0] += dr * dr * w;
            acc[1] += dr * dn * w;
            acc[2] += dn * dn * w;
        }
    };
    if pairs >= e.len().saturating_mul(p.len()) {
        for i in 0..e.len() {
            for j in 0..p.len() {
                visit(i, j, &mut acc);
            }
        }
    } else {
        for _ in 0..pairs {
            let i = rng.random_range(0..e.len());
            let j = rng.random_range(0..p.len());
            visit(i, j, &mut acc);
        }
    }
    if !(weight_sum > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    finish_onsager(acc, count as f64)
}

/// Onsager estimate built from the moves actually attempted by the sampler.
///
/// Each attempt starts at an ensemble member and proposes
/// `theta' ~ k(theta, .)`, `x' ~ f(.|theta')`, which is exactly the pair
/// measure in the definition of `L`. Attempts outside the prior support count
/// in the denominator only.
#[derive(Clone, Debug, Default)]
pub struct OnsagerAccumulator {
    acc: [f64; 3],
    attempts: u64,
}

impl OnsagerAccumulator {
    pub fn record(&mut self, from: (f64, f64), to: (f64, f64), eps: Vector2<f64>) {
        self.attempts += 1;
        if !to.1.is_finite() || to.0.is_nan() {
            return;
        }
        if let Some((dr, dn)) = onsager_term(from, to, eps) {
            self.acc[0] += dr * dr;
            self.acc[1] += dr * dn;
            self.acc[2] += dn * dn;
        }
    }

    pub fn attempts(&self) -> u64 {
        self.attempts
    }

    pub fn estimate(&self) -> Result<Matrix2<f64>> {
        finish_onsager(self.acc, self.attempts as f64)
    }

    pub fn clear(&mut self) {
        *self = Self::default();
    }
}

/// Solves `F^T L F = v` for the cooling force with `eps2_e = -a eps2`.
///
/// Returns `(eps1_e, eps2_e)` with `0 < eps1_e < eps1`.
pub fn solve_force_quadratic(
    l: &Matrix2<f64>,
    eps1: f64,
    eps2: f64,
    a: f64,
    v: f64,
) -> Result<(f64, f64)> {
    if !(eps1 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps1 must be positive, got {eps1}"
        )));
    }
    if !(v > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "v must be positive, got {v}"
        )));
    }
    let eps2_e = -a * eps2;
    let f2 = eps2 - eps2_e;
    let (l11, l12, l22) = (l[(0, 0)], 0.5 * (l[(0, 1)] + l[(1, 0)]), l[(1, 1)]);
    if !(l11 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "L11 must be positive, got {l11}"
        )));
    }
    let prior_term = l22 * f2 * f2;
    let b = l12 * f2;
    let disc = b * b - l11 * (prior_term - v);
    if disc < 0.0 {
        return Err(Error::EntropyBudgetExceeded { prior_term, v });
    }
    let f1 = (-b - disc.sqrt()) / l11;
    if !(f1 < 0.0) {
        return Err(Error::EntropyBudgetExceeded { prior_term, v });
    }
    let eps1_e = 1.0 / (1.0 / eps1 - f1);
    Ok((eps1_e, eps2_e))
}
