//! Gaussian random-walk proposals and Metropolis acceptance rules.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Covariance of the symmetric normal jump `k(theta, .) = N(theta, K)`, with
/// its Cholesky factor cached for the lifetime of an adaptation epoch.
#[derive(Clone, Debug)]
pub struct JumpCov {
    k: DMatrix<f64>,
    chol: DMatrix<f64>,
    inv: DMatrix<f64>,
    log_norm: f64,
    pub beta: f64,
    pub s: f64,
}

impl JumpCov {
    pub fn from_matrix(k: DMatrix<f64>) -> Result<Self> {
        if !k.is_square() || k.nrows() == 0 {
            return Err(Error::InvalidArgument(
                "jump covariance must be square".into(),
            ));
        }
        let d = k.nrows();
        let chol = k.clone().cholesky().ok_or(Error::SingularCovariance)?;
        let l = chol.l();
        let log_det: f64 = 2.0 * l.diagonal().iter().map(|x| x.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::SingularCovariance);
        }
        let inv = chol.inverse();
        let log_norm = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(Self {
            k,
            chol: l,
            inv,
            log_norm,
            beta: f64::NAN,
            s: f64::NAN,
        })
    }

    pub fn isotropic(d: usize, variance: f64) -> Result<Self> {
        Self::from_matrix(DMatrix::identity(d, d) * variance)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn dim(&self) -> usize {
        self.k.nrows()
    }
}

/// `K = beta * Sigma + s * tr(Sigma) * I`.
pub fn adapt_jump_cov(sigma: &DMatrix<f64>, beta: f64, s: f64) -> Result<JumpCov> {
    if !(beta > 0.0) || !(s > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "beta and s must be positive (beta={beta}, s={s})"
        )));
    }
    let trace = sigma.trace();
    if !(trace > 0.0) {
        return Err(Error::CollapsedEnsemble);
    }
    let d = sigma.nrows();
    let k = sigma * beta + DMatrix::identity(d, d) * (s * trace);
    let mut jc = JumpCov::from_matrix(k)?;
    jc.beta = beta;
    jc.s = s;
    Ok(jc)
}

/// Draws `theta + L z` with `L L^T = K`.
pub fn propose(theta: &[f64], k: &JumpCov, rng: &mut RngStream) -> Vec<f64> {
    let d = theta.len();
    debug_assert_eq!(d, k.dim());
    let z = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)));
    let step = &k.chol * z;
    theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect()
}

pub fn log_jump_density(k: &JumpCov, theta: &[f64], theta2: &[f64]) -> f64 {
    let diff = DVector::from_iterator(theta.len(), theta.iter().zip(theta2).map(|(a, b)| a - b));
    let q = (k.inv.transpose() * &diff).dot(&diff);
    k.log_norm - 0.5 * q
}

/// Normal density of a jump from `theta` to `theta2`; symmetric in its arguments.
pub fn jump_density(k: &JumpCov, theta: &[f64], theta2: &[f64]) -> f64 {
    log_jump_density(k, theta, theta2).exp()
}

/// `min(1, exp(-(u_new - u_old) / eps_e))`.
pub fn accept_prob_flat(u_old: f64, u_new: f64, eps_e: f64) -> f64 {
    let du = u_new - u_old;
    if du <= 0.0 {
        return 1.0;
    }
    if eps_e <= 0.0 {
        return 0.0;
    }
    (-du / eps_e).exp()
}

/// `min(1, exp(-(rho_new - rho_old) / eps1_e - (1 + eps2_e) (nu_new - nu_old)))`.
///
/// An infinite `nu_new` (proposal outside the prior support) is never accepted.
pub fn accept_prob_informative(
    rho_old: f64,
    rho_new: f64,
    nu_old: f64,
    nu_new: f64,
    eps1_e: f64,
    eps2_e: f64,
) -> f64 {
    if nu_new == f64::INFINITY || rho_new.is_nan() {
        return 0.0;
    }
    let drho = rho_new - rho_old;
    let dnu = nu_new - nu_old;
    let rho_term = if drho == 0.0 {
        0.0
    } else if eps1_e <= 0.0 {
        if drho > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    } else {
        drho / eps1_e
    };
    let log_ratio = -rho_term - (1.0 + eps2_e) * dnu;
    if log_ratio.is_nan() {
        return 0.0;
    }
    if log_ratio >= 0.0 {
        1.0
    } else {
        log_ratio.exp()
    }
}
