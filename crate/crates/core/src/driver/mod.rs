//! End-to-end runs: initialisation by rejection, random-scan Metropolis
//! updates grouped into mean-field epochs, stopping, and the final bias
//! correction.

mod explicit;
mod flat;
mod informative;

pub use explicit::run_explicit;
pub use flat::run_flat;
pub use informative::run_informative;

use std::collections::{HashSet, VecDeque};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{Ensemble, Particle, PriorRecord, PriorSample, Resampler};
use crate::error::{Error, Result};
use crate::kernel::{propose, JumpCov};
use crate::metric::EnergyCdf;
use crate::models::Model;
use crate::rng::RngStream;
use crate::schedule::{ExplicitSchedule, Trace};

pub(crate) const STREAM_INIT: u64 = 0;
pub(crate) const STREAM_UPDATES: u64 = 1;
pub(crate) const STREAM_RESAMPLE: u64 = 2;
pub(crate) const STREAM_ONSAGER: u64 = 3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Explicit,
    #[default]
    AdaptiveFlat,
    AdaptiveInformative,
}

/// What counts towards the length of a mean-field epoch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EpochCounting {
    #[default]
    Accepted,
    Attempted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxSims,
    AcceptRate,
    MaxUpdates,
    MaxSweeps,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    /// Ensemble size.
    pub n: usize,
    /// Initial tolerance; `inf` starts from the prior.
    pub eps_init: f64,
    /// Entropy production rate.
    pub v: f64,
    /// Flat-prior control knob; when unset it is `v / gamma` with `gamma`
    /// estimated on the initial ensemble.
    pub v_over_gamma: Option<f64>,
    pub beta: f64,
    pub s: f64,
    /// Counter-force gain on the prior intensity.
    pub a: f64,
    /// Strength of the final bias correction.
    pub delta: f64,
    pub adapt_jump: bool,
    pub mean_field_fraction: f64,
    pub epoch_counting: EpochCounting,
    pub stop_accept_rate: f64,
    /// Number of recent updates the acceptance rate is measured over.
    pub accept_window: usize,
    pub max_sims: u64,
    /// Cap on attempted updates, including proposals outside the prior support.
    pub max_updates: Option<u64>,
    pub seed: u64,
    pub resampler: Resampler,
    /// Prior draws kept for the energy transform and calibration, at least.
    pub min_prior_sample: usize,
    /// Re-estimate `gamma` every epoch when `v_over_gamma` is derived from `v`.
    pub reestimate_gamma: bool,
    pub calibration_ess_floor: f64,
    pub calibration_tolerance: f64,
    pub calibration_max_iter: usize,
    pub onsager_pairs: usize,
    pub qmatrix_bins: (usize, usize),
    pub schedule: ExplicitSchedule,
    pub max_sweeps: Option<u64>,
    /// Worker threads; `1` is the sequential reference mode.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::AdaptiveFlat,
            n: 1000,
            eps_init: f64::INFINITY,
            v: 0.3,
            v_over_gamma: None,
            beta: 2.0,
            s: 0.01,
            a: 2.0,
            delta: 0.0,
            adapt_jump: true,
            mean_field_fraction: 0.1,
            epoch_counting: EpochCounting::Accepted,
            stop_accept_rate: 0.05,
            accept_window: 1000,
            max_sims: 0,
            max_updates: None,
            seed: 0,
            resampler: Resampler::Systematic,
            min_prior_sample: 100,
            reestimate_gamma: false,
            calibration_ess_floor: 20.0,
            calibration_tolerance: 0.01,
            calibration_max_iter: 20,
            onsager_pairs: 100_000,
            qmatrix_bins: (50, 50),
            schedule: ExplicitSchedule {
                c: 1.0,
                alpha: 2.0,
                n: 1,
            },
            max_sweeps: None,
            workers: 1,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n < 2 {
            return bad(format!("ensemble size must be at least 2, got {}", self.n));
        }
        if !(self.eps_init > 0.0) {
            return bad(format!("eps_init must be positive, got {}", self.eps_init));
        }
        if self.max_sims == 0 {
            return bad("max_sims must be set".into());
        }
        if !(self.v > 0.0) && self.v_over_gamma.is_none() {
            return bad(format!("v must be positive, got {}", self.v));
        }
        if let Some(c) = self.v_over_gamma {
            if !(c >= 0.0) {
                return bad(format!("v_over_gamma must be >= 0, got {c}"));
            }
        }
        if !(self.beta > 0.0) || !(self.s >= 0.0) {
            return bad(format!(
                "need beta > 0 and s >= 0, got {} and {}",
                self.beta, self.s
            ));
        }
        if !(self.delta >= 0.0) {
            return bad(format!("delta must be >= 0, got {}", self.delta));
        }
        if !(self.a >= 0.0) {
            return bad(format!("a must be >= 0, got {}", self.a));
        }
        if !(self.mean_field_fraction > 0.0 && self.mean_field_fraction <= 1.0) {
            return bad(format!(
                "mean_field_fraction must be in (0, 1], got {}",
                self.mean_field_fraction
            ));
        }
        if !(0.0..=1.0).contains(&self.stop_accept_rate) || self.accept_window == 0 {
            return bad("stop_accept_rate must be in [0, 1] with a positive window".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.algorithm == Algorithm::AdaptiveInformative && !self.eps_init.is_finite() {
            return bad("adaptive-informative needs a finite eps_init".into());
        }
        if self.algorithm == Algorithm::Explicit {
            ExplicitSchedule::new(self.schedule.c, self.schedule.alpha, self.schedule.n)
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub(crate) fn epoch_len(&self) -> u64 {
        (self.mean_field_fraction * self.n as f64).ceil().max(1.0) as u64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunTotals {
    /// Likelihood simulations, initialisation included.
    pub sims: u64,
    pub init_sims: u64,
    pub updates: u64,
    pub accepted: u64,
    pub epochs: u64,
    pub prior_sample_size: usize,
    /// Final system intensities.
    pub final_eps: Vec<f64>,
    /// Final kernel intensities.
    pub final_eps_e: Vec<f64>,
    pub ess: f64,
    pub stop: StopReason,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    /// Ensemble after the final resampling.
    pub ensemble: Ensemble,
    /// Ensemble before resampling, with `weights`.
    pub weighted: Ensemble,
    pub weights: Vec<f64>,
    pub trace: Trace,
    pub totals: RunTotals,
    /// Ensemble mean parameter at the start and after every epoch.
    pub theta_means: Vec<Vec<f64>>,
    /// Mean distance of the initial ensemble.
    pub initial_mean_rho: f64,
    pub energy_cdf: Option<EnergyCdf>,
}

/// Runs the configured algorithm.
pub fn run(model: &dyn Model, cfg: &RunConfig) -> Result<RunResult> {
    match cfg.algorithm {
        Algorithm::Explicit => run_explicit(model, cfg),
        Algorithm::AdaptiveFlat => run_flat(model, cfg),
        Algorithm::AdaptiveInformative => run_informative(model, cfg),
    }
}

/// Draws from the joint prior until `n` draws have been accepted with
/// probability `exp(-rho/eps_init)`. Every draw is kept in the prior sample,
/// which is then topped up to `min_prior` records if the budget allows.
/// Returns the simulation count alongside.
pub fn initialize(
    model: &dyn Model,
    n: usize,
    eps_init: f64,
    max_sims: u64,
    min_prior: usize,
    rng: &mut RngStream,
) -> Result<(PriorSample, Ensemble, u64)> {
    if !(eps_init > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps_init must be positive, got {eps_init}"
        )));
    }
    let mut p = PriorSample::default();
    let mut particles = Vec::with_capacity(n);
    let mut sims = 0u64;
    let draw = |rng: &mut RngStream, sims: &mut u64| {
        let theta = model.sample_prior(rng);
        let rho = model.simulate_distance(&theta, rng);
        *sims += 1;
        let nu = model.prior_potential(&theta);
        (theta, rho, nu)
    };
    while particles.len() < n {
        if sims >= max_sims {
            return Err(Error::InitBudgetExhausted {
                sims,
                accepted: particles.len(),
                needed: n,
            });
        }
        let (theta, rho, nu) = draw(rng, &mut sims);
        p.records.push(PriorRecord {
            theta: theta.clone(),
            rho,
            nu,
        });
        let accept = rho.is_finite() && rng.random::<f64>() < (-rho / eps_init).exp();
        if accept {
            particles.push(Particle::new(theta, rho, nu));
        }
    }
    while p.len() < min_prior && sims < max_sims {
        let (theta, rho, nu) = draw(rng, &mut sims);
        p.records.push(PriorRecord { theta, rho, nu });
    }
    Ok((p, Ensemble::new(particles), sims))
}

/// A proposed update of one particle.
#[derive(Clone, Debug)]
pub(crate) struct Proposal {
    pub index: usize,
    pub theta: Vec<f64>,
    pub nu: f64,
    /// `None` when the proposal left the prior support and was not simulated.
    pub rho: Option<f64>,
    pub uniform: f64,
}

/// Generates proposals, each from its own child stream keyed by the global
/// update counter, so batches evaluated in parallel reproduce the sequential
/// trajectory exactly.
pub(crate) struct Stepper<'a> {
    model: &'a dyn Model,
    base: RngStream,
    pool: Option<rayon::ThreadPool>,
    workers: usize,
}

impl<'a> Stepper<'a> {
    pub fn new(model: &'a dyn Model, seed: u64, workers: usize) -> Result<Self> {
        let pool = if workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| Error::Config(e.to_string()))?,
            )
        } else {
            None
        };
        Ok(Self {
            model,
            base: RngStream::new(seed, STREAM_UPDATES),
            pool,
            workers,
        })
    }

    fn propose_one(&self, t: u64, fixed: Option<usize>, e: &Ensemble, k: &JumpCov) -> Proposal {
        let mut rng = self.base.child(t);
        let index = match fixed {
            Some(i) => i,
            None => rng.random_range(0..e.len()),
        };
        let theta = propose(&e.particles[index].theta, k, &mut rng);
        let uniform = rng.random::<f64>();
        let nu = self.model.prior_potential(&theta);
        let rho = nu
            .is_finite()
            .then(|| self.model.simulate_distance(&theta, &mut rng));
        Proposal {
            index,
            theta,
            nu,
            rho,
            uniform,
        }
    }

    fn evaluate(
        &self,
        jobs: Vec<(u64, Option<usize>)>,
        e: &Ensemble,
        k: &JumpCov,
    ) -> Vec<Proposal> {
        match &self.pool {
            None => jobs
                .into_iter()
                .map(|(t, f)| self.propose_one(t, f, e, k))
                .collect(),
            Some(pool) => pool.install(|| {
                jobs.into_par_iter()
                    .map(|(t, f)| self.propose_one(t, f, e, k))
                    .collect()
            }),
        }
    }

    /// Random-scan proposals for updates `t0, t0+1, ...`, cut before the
    /// first particle that would be touched twice.
    pub fn random_batch(&self, t0: u64, e: &Ensemble, k: &JumpCov) -> Vec<Proposal> {
        let len = self.batch_len();
        let mut seen = HashSet::with_capacity(len);
        let mut jobs = Vec::with_capacity(len);
        for t in t0..t0 + len as u64 {
            let i = self.base.child(t).random_range(0..e.len());
            if !seen.insert(i) {
                break;
            }
            jobs.push((t, None));
        }
        self.evaluate(jobs, e, k)
    }

    /// Proposals for the given particles, which must be distinct, at updates
    /// `t0, t0+1, ...`.
    pub fn fixed_batch(
        &self,
        t0: u64,
        indices: &[usize],
        e: &Ensemble,
        k: &JumpCov,
    ) -> Vec<Proposal> {
        let jobs = indices
            .iter()
            .enumerate()
            .map(|(j, &i)| (t0 + j as u64, Some(i)))
            .collect();
        self.evaluate(jobs, e, k)
    }

    pub fn batch_len(&self) -> usize {
        if self.pool.is_some() {
            8 * self.workers
        } else {
            1
        }
    }
}

/// Acceptance indicator over the most recent updates.
#[derive(Clone, Debug)]
pub(crate) struct AcceptWindow {
    buf: VecDeque<bool>,
    cap: usize,
    accepted: usize,
}

impl AcceptWindow {
    pub fn new(cap: usize) -> Self {
        Self {
            buf: VecDeque::with_capacity(cap),
            cap,
            accepted: 0,
        }
    }

    pub fn push(&mut self, accepted: bool) {
        if self.buf.len() == self.cap && self.buf.pop_front() == Some(true) {
            self.accepted -= 1;
        }
        self.buf.push_back(accepted);
        self.accepted += accepted as usize;
    }

    /// Rate over a full window, `None` before the window has filled.
    pub fn rate(&self) -> Option<f64> {
        (self.buf.len() == self.cap).then(|| self.accepted as f64 / self.cap as f64)
    }
}

/// Counters shared by the adaptive drivers.
#[derive(Clone, Debug)]
pub(crate) struct Progress {
    pub sims: u64,
    pub updates: u64,
    pub accepted: u64,
    pub epoch: u64,
    pub epoch_accepted: u64,
    pub epoch_attempts: u64,
    pub window: AcceptWindow,
}

impl Progress {
    pub fn new(sims: u64, window: usize) -> Self {
        Self {
            sims,
            updates: 0,
            accepted: 0,
            epoch: 0,
            epoch_accepted: 0,
            epoch_attempts: 0,
            window: AcceptWindow::new(window),
        }
    }

    pub fn epoch_accept_rate(&self) -> f64 {
        self.epoch_accepted as f64 / self.epoch_attempts.max(1) as f64
    }
}

/// Per-epoch control of a random-scan sampler.
pub(crate) trait Controller {
    fn kernel(&self) -> &JumpCov;

    /// Acceptance probability of a simulated proposal, and the particle that
    /// replaces the current one if accepted.
    fn judge(&self, current: &Particle, proposal: &Proposal, rho: f64) -> (f64, Particle);

    fn observe(&mut self, _current: &Particle, _proposal: &Proposal) {}

    fn end_epoch(&mut self, e: &Ensemble, progress: &Progress) -> Result<()>;
}

/// Random-scan updates until a stop rule fires. Epochs end after
/// `cfg.epoch_len()` accepted (or attempted) updates.
pub(crate) fn random_scan<C: Controller>(
    stepper: &Stepper<'_>,
    cfg: &RunConfig,
    e: &mut Ensemble,
    ctl: &mut C,
    progress: &mut Progress,
) -> Result<StopReason> {
    let epoch_len = cfg.epoch_len();
    let max_updates = cfg
        .max_updates
        .unwrap_or_else(|| cfg.max_sims.saturating_mul(100).max(1_000_000));
    loop {
        let batch = stepper.random_batch(progress.updates, e, ctl.kernel());
        for prop in batch {
            if progress.sims >= cfg.max_sims {
                return Ok(StopReason::MaxSims);
            }
            if progress.updates >= max_updates {
                return Ok(StopReason::MaxUpdates);
            }
            progress.updates += 1;
            let current = &e.particles[prop.index];
            ctl.observe(current, &prop);
            let accepted = match prop.rho {
                None => false,
                Some(rho) => {
                    progress.sims += 1;
                    let (prob, next) = ctl.judge(current, &prop, rho);
                    if prop.uniform < prob {
                        e.replace(prop.index, next);
                        true
                    } else {
                        false
                    }
                }
            };
            progress.window.push(accepted);
            progress.epoch_attempts += 1;
            if accepted {
                progress.accepted += 1;
                progress.epoch_accepted += 1;
            }
            let done = match cfg.epoch_counting {
                EpochCounting::Accepted => progress.epoch_accepted >= epoch_len,
                EpochCounting::Attempted => progress.epoch_attempts >= epoch_len,
            };
            if let Some(rate) = progress.window.rate() {
                if rate < cfg.stop_accept_rate {
                    return Ok(StopReason::AcceptRate);
                }
            }
            if done {
                progress.epoch += 1;
                ctl.end_epoch(e, progress)?;
                progress.epoch_accepted = 0;
                progress.epoch_attempts = 0;
                // The rest of the batch was proposed under the old controls.
                break;
            }
        }
    }
}

/// Normalised weights from log-weights.
pub(crate) fn weights_from_log(logw: &[f64]) -> Result<Vec<f64>> {
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    Ok(logw.iter().map(|l| (l - max).exp()).collect())
}

/// Covariance of the parameter vectors, or `None` if too few or collapsed.
pub(crate) fn adapted_kernel(e: &Ensemble, cfg: &RunConfig) -> Result<JumpCov> {
    let sigma = crate::ensemble::empirical_cov(&e.thetas())?;
    crate::kernel::adapt_jump_cov(&sigma, cfg.beta, cfg.s)
}

pub(crate) fn theta_mean(e: &Ensemble) -> Vec<f64> {
    (0..e.dim()).map(|i| e.mean_theta(i)).collect()
}
