//! Approximate Bayesian computation by simulated annealing.
//!
//! An ensemble of parameter particles is driven through a family of tempered
//! targets `f(x|theta) f(theta) exp(-rho(x, y)/eps)` by a Metropolis kernel,
//! while the tolerance `eps` is lowered adaptively so that the rate of wasted
//! simulation effort stays constant.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod driver;
pub mod ensemble;
pub mod error;
pub mod kernel;
pub mod metric;
pub mod models;
pub mod oracle;
pub mod qmatrix;
pub mod rng;
pub mod schedule;

pub use driver::{run, Algorithm, RunConfig, RunResult};
pub use ensemble::{Ensemble, Particle, PriorSample, Resampler};
pub use error::{Error, Result};
pub use models::Model;
pub use rng::RngStream;
