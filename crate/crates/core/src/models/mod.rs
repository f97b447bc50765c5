//! Problem definitions: prior, prior potential, likelihood simulator and the
//! distance to the observed data.

mod tb;
mod toy;

pub use tb::{tb_model, tb_simulate, tb_stats, TbData, TbModel, TbState, TB_OBSERVED_CLUSTERS};
pub use toy::{toy1_model, toy2_model, Toy1, Toy2, TOY1_SIGMA};

use crate::metric;
use crate::rng::RngStream;

/// What a likelihood draw produces.
#[derive(Clone, Debug, PartialEq)]
pub enum Output {
    /// A raw output vector, compared to the data with [`metric::rho`].
    Raw(Vec<f64>),
    /// A distance to the data computed by the model itself.
    Distance(f64),
}

pub trait Model: Send + Sync {
    fn name(&self) -> &str;

    /// Parameter dimension.
    fn dim(&self) -> usize;

    fn sample_prior(&self, rng: &mut RngStream) -> Vec<f64>;

    /// `-ln f(theta)` with the normalised prior density; `+inf` outside the support.
    fn prior_potential(&self, theta: &[f64]) -> f64;

    fn in_support(&self, theta: &[f64]) -> bool {
        self.prior_potential(theta).is_finite()
    }

    /// Draws an output from `f(.|theta)`.
    fn simulate(&self, theta: &[f64], rng: &mut RngStream) -> Output;

    /// Observed data for models with raw outputs.
    fn data(&self) -> Option<&[f64]> {
        None
    }

    /// Dimension `n` of the output space.
    fn output_dim(&self) -> usize;

    /// Exponent of the distance.
    fn alpha(&self) -> f64;

    fn simulate_distance(&self, theta: &[f64], rng: &mut RngStream) -> f64 {
        match self.simulate(theta, rng) {
            Output::Distance(d) => d,
            Output::Raw(x) => {
                let y = self.data().expect("raw-output model must provide data");
                metric::rho(&x, y, self.alpha()).unwrap_or(f64::INFINITY)
            }
        }
    }
}

impl<M: Model + ?Sized> Model for Box<M> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn sample_prior(&self, rng: &mut RngStream) -> Vec<f64> {
        (**self).sample_prior(rng)
    }
    fn prior_potential(&self, theta: &[f64]) -> f64 {
        (**self).prior_potential(theta)
    }
    fn in_support(&self, theta: &[f64]) -> bool {
        (**self).in_support(theta)
    }
    fn simulate(&self, theta: &[f64], rng: &mut RngStream) -> Output {
        (**self).simulate(theta, rng)
    }
    fn data(&self) -> Option<&[f64]> {
        (**self).data()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn alpha(&self) -> f64 {
        (**self).alpha()
    }
    fn simulate_distance(&self, theta: &[f64], rng: &mut RngStream) -> f64 {
        (**self).simulate_distance(theta, rng)
    }
}
