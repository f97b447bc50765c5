use crate::ensemble::{ess, resample, Particle};
use crate::error::Result;
use crate::kernel::accept_prob_informative;
use crate::models::Model;
use crate::rng::RngStream;
use crate::schedule::{explicit_epsilon, FlatTraceRow, Trace};

use super::{
    adapted_kernel, initialize, theta_mean, weights_from_log, RunConfig, RunResult, RunTotals,
    Stepper, StopReason, STREAM_INIT, STREAM_RESAMPLE,
};

/// Annealing on a fixed tolerance sequence: sweep `k` updates every particle
/// once at `eps_k = c k^(-alpha/n)` with a jump kernel fitted to the initial
/// ensemble.
pub fn run_explicit(model: &dyn Model, cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    let mut init_rng = RngStream::new(cfg.seed, STREAM_INIT);
    let (p, mut e, init_sims) = initialize(
        model,
        cfg.n,
        cfg.eps_init,
        cfg.max_sims,
        cfg.min_prior_sample,
        &mut init_rng,
    )?;
    let initial_mean_rho = e.mean_rho();
    let k = adapted_kernel(&e, cfg)?;
    let stepper = Stepper::new(model, cfg.seed, cfg.workers)?;
    let n = e.len();
    let mut sims = init_sims;
    let mut updates = 0u64;
    let mut accepted_total = 0u64;
    let mut sweep = 0u64;
    let mut eps = cfg.eps_init;
    let mut trace = vec![FlatTraceRow {
        epoch: 0,
        sims,
        accept_rate: f64::NAN,
        u: e.mean_rho(),
        eps,
        eps_e: eps,
        gamma: f64::NAN,
        ess: n as f64,
        s_irr_rate: f64::NAN,
    }];
    let mut theta_means = vec![theta_mean(&e)];
    let order: Vec<usize> = (0..n).collect();
    let stop = 'run: loop {
        if cfg.max_sweeps.is_some_and(|m| sweep >= m) {
            break StopReason::MaxSweeps;
        }
        sweep += 1;
        eps = explicit_epsilon(&cfg.schedule, sweep);
        let mut accepted = 0u64;
        let mut attempts = 0u64;
        for chunk in order.chunks(stepper.batch_len().max(1)) {
            let batch = stepper.fixed_batch(updates, chunk, &e, &k);
            for prop in batch {
                if sims >= cfg.max_sims {
                    break 'run StopReason::MaxSims;
                }
                updates += 1;
                attempts += 1;
                let Some(rho) = prop.rho else { continue };
                sims += 1;
                let cur = &e.particles[prop.index];
                let prob = accept_prob_informative(cur.rho, rho, cur.nu, prop.nu, eps, 0.0);
                if prop.uniform < prob {
                    e.replace(prop.index, Particle::new(prop.theta, rho, prop.nu));
                    accepted += 1;
                }
            }
        }
        accepted_total += accepted;
        trace.push(FlatTraceRow {
            epoch: sweep,
            sims,
            accept_rate: accepted as f64 / attempts.max(1) as f64,
            u: e.mean_rho(),
            eps,
            eps_e: eps,
            gamma: f64::NAN,
            ess: n as f64,
            s_irr_rate: f64::NAN,
        });
        theta_means.push(theta_mean(&e));
    };

    let logw: Vec<f64> = e
        .particles
        .iter()
        .map(|p| -cfg.delta * p.rho / eps)
        .collect();
    let weights = weights_from_log(&logw)?;
    let n_eff = ess(&weights)?;
    let mut rs_rng = RngStream::new(cfg.seed, STREAM_RESAMPLE);
    let resampled = resample(&e, &weights, cfg.resampler, &mut rs_rng)?;
    Ok(RunResult {
        ensemble: resampled,
        weighted: e,
        weights,
        totals: RunTotals {
            sims,
            init_sims,
            updates,
            accepted: accepted_total,
            epochs: sweep,
            prior_sample_size: p.len(),
            final_eps: vec![eps],
            final_eps_e: vec![eps],
            ess: n_eff,
            stop,
        },
        trace: Trace::Flat(trace),
        theta_means,
        initial_mean_rho,
        energy_cdf: None,
    })
}
