use crate::ensemble::{bias_correction_weights_flat, ess, resample, Ensemble, Particle};
use crate::error::Result;
use crate::kernel::{accept_prob_flat, JumpCov};
use crate::metric::EnergyCdf;
use crate::models::Model;
use crate::rng::RngStream;
use crate::schedule::{
    estimate_gamma, solve_quartic, temperature_of_mean_energy, FlatTraceRow, Trace,
};

use super::{
    adapted_kernel, initialize, random_scan, theta_mean, Controller, Progress, Proposal, RunConfig,
    RunResult, RunTotals, Stepper, STREAM_INIT, STREAM_RESAMPLE,
};

struct FlatControl<'a> {
    cfg: &'a RunConfig,
    g: EnergyCdf,
    k: JumpCov,
    u: f64,
    eps_e: f64,
    gamma: f64,
    v_over_gamma: f64,
    n: usize,
    trace: Vec<FlatTraceRow>,
    theta_means: Vec<Vec<f64>>,
}

impl FlatControl<'_> {
    fn row(&self, progress: &Progress, accept_rate: f64, s_irr_rate: f64) -> FlatTraceRow {
        FlatTraceRow {
            epoch: progress.epoch,
            sims: progress.sims,
            accept_rate,
            u: self.u,
            eps: temperature_of_mean_energy(self.u),
            eps_e: self.eps_e,
            gamma: self.gamma,
            ess: self.n as f64,
            s_irr_rate,
        }
    }
}

impl Controller for FlatControl<'_> {
    fn kernel(&self) -> &JumpCov {
        &self.k
    }

    fn judge(&self, current: &Particle, prop: &Proposal, rho: f64) -> (f64, Particle) {
        let u_new = self.g.energy(rho);
        let u_old = current.u.expect("flat ensemble carries energies");
        let next = Particle::new(prop.theta.clone(), rho, prop.nu).with_energy(u_new);
        (accept_prob_flat(u_old, u_new, self.eps_e), next)
    }

    fn end_epoch(&mut self, e: &Ensemble, progress: &Progress) -> Result<()> {
        let u_new = e.mean_energy();
        let dt = progress.epoch_attempts as f64 / self.n as f64;
        let udot = (u_new - self.u) / dt;
        let eps_mid = temperature_of_mean_energy(0.5 * (u_new + self.u));
        let s_irr = (1.0 / eps_mid - 1.0 / self.eps_e) * udot;
        self.u = u_new;
        if self.cfg.adapt_jump {
            self.k = adapted_kernel(e, self.cfg)?;
        }
        if self.cfg.reestimate_gamma && self.cfg.v_over_gamma.is_none() {
            self.gamma = estimate_gamma(&e.thetas(), &self.k)?;
            self.v_over_gamma = self.cfg.v / self.gamma;
        }
        self.eps_e = solve_quartic(self.u, self.v_over_gamma)?;
        let row = self.row(progress, progress.epoch_accept_rate(), s_irr);
        self.trace.push(row);
        self.theta_means.push(super::theta_mean(e));
        Ok(())
    }
}

/// Flat-prior annealing on rank-transformed energies.
pub fn run_flat(model: &dyn Model, cfg: &RunConfig) -> Result<RunResult> {
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
    let g = EnergyCdf::fit(&p.rhos(), model.output_dim(), model.alpha())?;
    for particle in &mut e.particles {
        particle.u = Some(g.energy(particle.rho));
    }
    let initial_mean_rho = e.mean_rho();
    let k = adapted_kernel(&e, cfg)?;
    let gamma = estimate_gamma(&e.thetas(), &k)?;
    let v_over_gamma = cfg.v_over_gamma.unwrap_or(cfg.v / gamma);
    let u = e.mean_energy();
    let eps_e = solve_quartic(u, v_over_gamma)?;
    let mut ctl = FlatControl {
        cfg,
        g,
        k,
        u,
        eps_e,
        gamma,
        v_over_gamma,
        n: cfg.n,
        trace: Vec::new(),
        theta_means: vec![theta_mean(&e)],
    };
    let mut progress = Progress::new(init_sims, cfg.accept_window);
    ctl.trace.push(ctl.row(&progress, f64::NAN, f64::NAN));

    let stepper = Stepper::new(model, cfg.seed, cfg.workers)?;
    let stop = random_scan(&stepper, cfg, &mut e, &mut ctl, &mut progress)?;

    // The ensemble may have moved since the last epoch boundary.
    let u_final = e.mean_energy();
    let weights = bias_correction_weights_flat(&e, cfg.delta, u_final)?;
    let n_eff = ess(&weights)?;
    let mut rs_rng = RngStream::new(cfg.seed, STREAM_RESAMPLE);
    let resampled = resample(&e, &weights, cfg.resampler, &mut rs_rng)?;
    Ok(RunResult {
        ensemble: resampled,
        weighted: e,
        weights,
        totals: RunTotals {
            sims: progress.sims,
            init_sims,
            updates: progress.updates,
            accepted: progress.accepted,
            epochs: progress.epoch,
            prior_sample_size: p.len(),
            final_eps: vec![u_final],
            final_eps_e: vec![ctl.eps_e],
            ess: n_eff,
            stop,
        },
        trace: Trace::Flat(ctl.trace),
        theta_means: ctl.theta_means,
        initial_mean_rho,
        energy_cdf: Some(ctl.g),
    })
}
