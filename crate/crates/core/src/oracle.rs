//! Independent reference computations: exact rejection draws from the
//! tempered target, closed-form posteriors, a bisection root finder and the
//! goodness-of-fit statistics used to compare samplers against them.
//!
//! Nothing here calls the sampler's own solvers.

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::ensemble::Particle;
use crate::error::{Error, Result};
use crate::models::{Model, Output};
use crate::rng::RngStream;

/// Accepted draws from the tempered target.
#[derive(Clone, Debug)]
pub struct OracleSample {
    pub particles: Vec<Particle>,
    pub weights: Vec<f64>,
    pub draws: u64,
}

impl OracleSample {
    pub fn acceptance_rate(&self) -> f64 {
        self.particles.len() as f64 / self.draws as f64
    }

    /// Values of coordinate `i`.
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.particles.iter().map(|p| p.theta[i]).collect()
    }
}

fn distance(model: &dyn Model, out: Output) -> f64 {
    match out {
        Output::Distance(d) => d,
        Output::Raw(x) => {
            let y = model.data().expect("raw-output model must provide data");
            let a = model.alpha();
            x.iter()
                .zip(y)
                .map(|(xi, yi)| (xi - yi).abs().powf(a))
                .sum::<f64>()
                / a
        }
    }
}

/// I.i.d. draws from `f(x|theta) f(theta) exp(-rho/eps)` by rejection from
/// the joint prior. Aborts if fewer than one draw in a million is accepted.
pub fn rejection_sample_pi_eps(
    model: &dyn Model,
    eps: f64,
    count: usize,
    rng: &mut RngStream,
) -> Result<OracleSample> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let mut particles = Vec::with_capacity(count);
    let mut draws = 0u64;
    while particles.len() < count {
        let theta = model.sample_prior(rng);
        let out = model.simulate(&theta, rng);
        let rho = distance(model, out);
        draws += 1;
        if rng.random::<f64>() < (-rho / eps).exp() {
            let nu = model.prior_potential(&theta);
            particles.push(Particle::new(theta, rho, nu));
        }
        if draws >= 1_000_000 && (particles.len() as f64) < 1e-6 * draws as f64 {
            return Err(Error::AcceptanceTooLow(
                particles.len() as f64 / draws as f64,
            ));
        }
    }
    Ok(OracleSample {
        weights: vec![1.0; particles.len()],
        particles,
        draws,
    })
}

/// Posterior CDF of the first benchmark at `y = 0`: the equal mixture of
/// `N(0, 1)` and `N(0, 0.01)` truncated to `[-10, 10]`.
pub fn toy1_posterior_cdf(theta: f64) -> f64 {
    let wide = Normal::new(0.0, 1.0).unwrap();
    let narrow = Normal::new(0.0, 0.1).unwrap();
    let mix = |t: f64| 0.5 * wide.cdf(t) + 0.5 * narrow.cdf(t);
    let (lo, hi) = (mix(-10.0), mix(10.0));
    ((mix(theta.clamp(-10.0, 10.0)) - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// Variance of the first benchmark's posterior.
pub fn toy1_posterior_variance() -> f64 {
    0.5 * 1.0 + 0.5 * 0.01
}

/// Mean and variance of the theta-marginal of the tempered target for the
/// second benchmark (prior `N(0,1)`, likelihood `N(theta,1)`, Gaussian
/// kernel of variance `eps`).
pub fn toy2_pi_eps_moments(y: f64, eps: f64) -> (f64, f64) {
    (y / (2.0 + eps), (1.0 + eps) / (2.0 + eps))
}

pub fn toy2_pi_eps_cdf(y: f64, eps: f64, theta: f64) -> f64 {
    let (m, v) = toy2_pi_eps_moments(y, eps);
    Normal::new(m, v.sqrt()).unwrap().cdf(theta)
}

/// Root of `(U^2 - e^2)^2 / (2 e^3) = c` on `(0, U)` by plain bisection to
/// full double precision.
pub fn bisect_quartic(u: f64, v_over_gamma: f64) -> f64 {
    if v_over_gamma == 0.0 {
        return u;
    }
    let h = |e: f64| (u * u - e * e).powi(2) / (2.0 * e * e * e) - v_over_gamma;
    let (mut lo, mut hi) = (0.0f64, u);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        if mid == 0.0 || h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// One-sample Kolmogorov-Smirnov distance.
pub fn ks_one_sample(values: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let v = sorted(values);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Kolmogorov-Smirnov distance of a weighted sample.
pub fn ks_weighted(values: &[f64], weights: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    let mut d: f64 = 0.0;
    for i in idx {
        let f = cdf(values[i]);
        d = d.max((f - acc / total).abs());
        acc += weights[i];
        d = d.max((acc / total - f).abs());
    }
    d
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic p-value of a KS distance `d` with effective size `n_eff`.
pub fn ks_pvalue(d: f64, n_eff: f64) -> f64 {
    let t = (n_eff.sqrt() + 0.12 + 0.11 / n_eff.sqrt()) * d;
    if t < 0.2 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-2.0 * (k * k) as f64 * t * t).exp();
        p += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// Mann-Kendall trend test: returns the statistic `S`, its normal score and
/// the two-sided p-value.
pub fn mann_kendall(series: &[f64]) -> (f64, f64, f64) {
    let n = series.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += (series[j] - series[i]).signum() * ((series[j] != series[i]) as u8 as f64);
        }
    }
    let nf = n as f64;
    let var = nf * (nf - 1.0) * (2.0 * nf + 5.0) / 18.0;
    let z = if s > 0.0 {
        (s - 1.0) / var.sqrt()
    } else if s < 0.0 {
        (s + 1.0) / var.sqrt()
    } else {
        0.0
    };
    let p = 2.0 * (1.0 - Normal::new(0.0, 1.0).unwrap().cdf(z.abs()));
    (s, z, p)
}

/// Sample mean and unbiased variance.
pub fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let v = values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{toy1_model, toy2_model};
    use approx::assert_relative_eq;

    #[test]
    fn toy1_cdf_values() {
        assert_relative_eq!(toy1_posterior_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(toy1_posterior_cdf(10.0), 1.0);
        assert_relative_eq!(toy1_posterior_cdf(0.1), 0.690_586, epsilon = 1e-5);
    }

    #[test]
    fn quartic_bisection() {
        assert_relative_eq!(
            bisect_quartic(0.01, 3.0),
            1.174_698_710_893e-3,
            max_relative = 1e-10
        );
        assert_eq!(bisect_quartic(0.3, 0.0), 0.3);
    }

    #[test]
    fn toy2_rejection_matches_closed_form() {
        let m = toy2_model(3.0);
        let mut rng = RngStream::new(11, 0);
        let s = rejection_sample_pi_eps(&m, 1.0, 10_000, &mut rng).unwrap();
        let (mean, var) = mean_var(&s.coordinate(0));
        let (em, ev) = toy2_pi_eps_moments(3.0, 1.0);
        assert_relative_eq!(em, 1.0);
        assert!((mean - em).abs() < 4.0 * (ev / 1e4).sqrt(), "{mean}");
        assert!((var - ev).abs() < 4.0 * ev * (2.0f64 / 1e4).sqrt(), "{var}");
    }

    #[test]
    fn toy1_large_eps_is_prior() {
        let m = toy1_model();
        let mut rng = RngStream::new(12, 0);
        let s = rejection_sample_pi_eps(&m, 1e12, 2000, &mut rng).unwrap();
        assert_eq!(s.draws, 2000);
        let d = ks_one_sample(&s.coordinate(0), |t| ((t + 10.0) / 20.0).clamp(0.0, 1.0));
        assert!(d < 0.05);
    }

    #[test]
    fn ks_statistics() {
        let v = [0.1, 0.2, 0.3, 0.4];
        assert_relative_eq!(ks_one_sample(&v, |x| x.clamp(0.0, 1.0)), 0.6);
        assert_relative_eq!(ks_weighted(&v, &[1.0; 4], |x| x.clamp(0.0, 1.0)), 0.6);
        assert_relative_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert_relative_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert!(ks_pvalue(0.0872, 500.0) < 2e-3 && ks_pvalue(0.0872, 500.0) > 5e-4);
    }

    #[test]
    fn mann_kendall_detects_trend() {
        let up: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let (s, _, p) = mann_kendall(&up);
        assert_eq!(s, 435.0);
        assert!(p < 1e-6);
        let flat = [1.0, 3.0, 2.0, 1.0, 3.0, 2.0];
        assert!(mann_kendall(&flat).2 > 0.5);
    }
}
