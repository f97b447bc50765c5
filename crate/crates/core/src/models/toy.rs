//! The two one-dimensional benchmarks with closed-form posteriors.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Model, Output};
use crate::rng::RngStream;

pub const TOY1_SIGMA: f64 = 0.1;
const TOY1_BOUND: f64 = 10.0;

/// Uniform prior on `[-10, 10]`; likelihood proportional to
/// `exp(-(x-theta)^2/2) + (1/sigma) exp(-(x-theta)^2/(2 sigma^2))`.
///
/// Both terms integrate to `sqrt(2 pi)`, so the likelihood is the equal-weight
/// mixture `N(theta, 1)/2 + N(theta, sigma^2)/2`.
#[derive(Clone, Debug)]
pub struct Toy1 {
    pub sigma: f64,
    data: [f64; 1],
}

pub fn toy1_model() -> Toy1 {
    Toy1 {
        sigma: TOY1_SIGMA,
        data: [0.0],
    }
}

impl Model for Toy1 {
    fn name(&self) -> &str {
        "toy1"
    }

    fn dim(&self) -> usize {
        1
    }

    fn sample_prior(&self, rng: &mut RngStream) -> Vec<f64> {
        vec![rng.random_range(-TOY1_BOUND..TOY1_BOUND)]
    }

    fn prior_potential(&self, theta: &[f64]) -> f64 {
        if theta[0].abs() <= TOY1_BOUND {
            (2.0 * TOY1_BOUND).ln()
        } else {
            f64::INFINITY
        }
    }

    fn simulate(&self, theta: &[f64], rng: &mut RngStream) -> Output {
        let z: f64 = StandardNormal.sample(rng);
        let scale = if rng.random::<bool>() {
            1.0
        } else {
            self.sigma
        };
        Output::Raw(vec![theta[0] + scale * z])
    }

    fn data(&self) -> Option<&[f64]> {
        Some(&self.data)
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn alpha(&self) -> f64 {
        2.0
    }
}

/// Standard normal prior and unit-variance normal likelihood; the posterior
/// given `y` is `N(y/2, 1/2)`.
#[derive(Clone, Debug)]
pub struct Toy2 {
    data: [f64; 1],
}

pub fn toy2_model(y: f64) -> Toy2 {
    Toy2 { data: [y] }
}

impl Toy2 {
    pub fn y(&self) -> f64 {
        self.data[0]
    }

    pub fn posterior_mean(&self) -> f64 {
        self.y() / 2.0
    }

    pub fn posterior_variance(&self) -> f64 {
        0.5
    }
}

impl Model for Toy2 {
    fn name(&self) -> &str {
        "toy2"
    }

    fn dim(&self) -> usize {
        1
    }

    fn sample_prior(&self, rng: &mut RngStream) -> Vec<f64> {
        vec![StandardNormal.sample(rng)]
    }

    fn prior_potential(&self, theta: &[f64]) -> f64 {
        0.5 * theta[0] * theta[0] + 0.5 * (2.0 * std::f64::consts::PI).ln()
    }

    fn simulate(&self, theta: &[f64], rng: &mut RngStream) -> Output {
        let z: f64 = StandardNormal.sample(rng);
        Output::Raw(vec![theta[0] + z])
    }

    fn data(&self) -> Option<&[f64]> {
        Some(&self.data)
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn alpha(&self) -> f64 {
        2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn raw(o: Output) -> f64 {
        match o {
            Output::Raw(x) => x[0],
            Output::Distance(_) => unreachable!(),
        }
    }

    #[test]
    fn toy1_constants() {
        let m = toy1_model();
        assert_eq!(m.sigma, 0.1);
        assert!(m.in_support(&[10.0]) && m.in_support(&[-10.0]));
        assert!(!m.in_support(&[10.01]));
        let mut rng = RngStream::new(1, 0);
        for _ in 0..1000 {
            assert!(m.sample_prior(&mut rng)[0].abs() <= 10.0);
        }
    }

    #[test]
    fn toy1_output_moments() {
        let m = toy1_model();
        let mut rng = RngStream::new(2, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| raw(m.simulate(&[2.0], &mut rng))).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 2.0).abs() < 3.0 * (0.505f64 / n as f64).sqrt());
        assert!((var - 0.505).abs() < 0.015, "{var}");
    }

    #[test]
    fn toy2_constants() {
        let m = toy2_model(3.0);
        assert_eq!(m.posterior_mean(), 1.5);
        assert_eq!(m.posterior_variance(), 0.5);
        assert_relative_eq!(m.prior_potential(&[0.0]), 0.918_938_533_2, epsilon = 1e-9);
        let mut rng = RngStream::new(0, 0);
        assert_eq!(m.simulate_distance(&[3.0], &mut rng.clone()), {
            let x = raw(m.simulate(&[3.0], &mut rng));
            (x - 3.0).powi(2) / 2.0
        });
    }
}
