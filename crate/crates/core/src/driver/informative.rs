use nalgebra::{Matrix2, Vector2};

use crate::ensemble::{ess, resample, Ensemble, Particle, PriorSample};
use crate::error::{Error, Result};
use crate::kernel::{accept_prob_informative, JumpCov};
use crate::models::Model;
use crate::qmatrix::{BinGrid, QMatrix};
use crate::rng::RngStream;
use crate::schedule::{
    calibrate_u_of_eps, estimate_onsager, force, jacobi_matrix, solve_force_quadratic,
    update_intensities, InfoTraceRow, OnsagerAccumulator, Trace,
};

use super::{
    adapted_kernel, initialize, random_scan, theta_mean, weights_from_log, Controller, Progress,
    Proposal, RunConfig, RunResult, RunTotals, Stepper, STREAM_INIT, STREAM_ONSAGER,
    STREAM_RESAMPLE,
};

struct InfoControl<'a> {
    cfg: &'a RunConfig,
    p: &'a PriorSample,
    k: JumpCov,
    u: Vector2<f64>,
    eps: Vector2<f64>,
    eps_e: Vector2<f64>,
    onsager: Matrix2<f64>,
    attempts: OnsagerAccumulator,
    q: Option<QMatrix>,
    rng: RngStream,
    n: usize,
    trace: Vec<InfoTraceRow>,
    theta_means: Vec<Vec<f64>>,
}

fn moments(e: &Ensemble) -> (Vector2<f64>, f64, f64, f64) {
    let n = e.len() as f64;
    let u = Vector2::new(e.mean_rho(), e.mean_nu());
    let (mut vr, mut c, mut vn) = (0.0, 0.0, 0.0);
    for p in &e.particles {
        let (dr, dn) = (p.rho - u[0], p.nu - u[1]);
        vr += dr * dr;
        c += dr * dn;
        vn += dn * dn;
    }
    let d = n - 1.0;
    (u, vr / d, c / d, vn / d)
}

impl InfoControl<'_> {
    fn row(&self, progress: &Progress, accept_rate: f64, s_irr_rate: f64) -> InfoTraceRow {
        InfoTraceRow {
            epoch: progress.epoch,
            sims: progress.sims,
            accept_rate,
            u1: self.u[0],
            u2: self.u[1],
            eps1: self.eps[0],
            eps2: self.eps[1],
            eps1_e: self.eps_e[0],
            eps2_e: self.eps_e[1],
            l11: self.onsager[(0, 0)],
            l12: self.onsager[(0, 1)],
            l22: self.onsager[(1, 1)],
            ess: self.n as f64,
            s_irr_rate,
        }
    }

    /// `U(eps)` from the prior sample, or from the attempted-move chain once
    /// the prior sample has run out of effective records at these intensities.
    fn calibrate(
        &self,
        eps: Vector2<f64>,
        e: &Ensemble,
        u_target: Vector2<f64>,
    ) -> Result<Vector2<f64>> {
        match calibrate_u_of_eps(self.p, eps, self.cfg.calibration_ess_floor) {
            Err(Error::PriorSampleExhausted { ess, floor }) => {
                let q = self
                    .q
                    .as_ref()
                    .ok_or(Error::PriorSampleExhausted { ess, floor })?;
                // Bins coarser than the signal cannot resolve U.
                if q.grid().rho_width() > 0.25 * u_target[0] {
                    return Err(Error::PriorSampleExhausted { ess, floor });
                }
                let seeds: Vec<(f64, f64)> = e.particles.iter().map(|p| (p.rho, p.nu)).collect();
                Ok(q.moments(eps, &seeds)?.0)
            }
            other => other,
        }
    }

    /// Moves the intensities so that `U(eps)` follows the observed change of
    /// the ensemble means, recalibrating until they agree to the tolerance.
    fn track(
        &self,
        e: &Ensemble,
        u_new: Vector2<f64>,
        var_rho: f64,
        cov: f64,
        var_nu: f64,
    ) -> Vector2<f64> {
        let mut eps = self.eps;
        let mut u_ref = self.u;
        for _ in 0..self.cfg.calibration_max_iter.max(1) {
            let jac = jacobi_matrix(var_rho, cov, var_nu, eps[0]);
            let Ok(mut next) = update_intensities(eps, u_new - u_ref, &jac) else {
                return eps;
            };
            if !(next[0] > 0.0) || !next[0].is_finite() {
                next[0] = 0.5 * eps[0];
            }
            if !next[1].is_finite() {
                next[1] = eps[1];
            }
            eps = next;
            match self.calibrate(eps, e, u_new) {
                Ok(u_cal) => {
                    let tol = self.cfg.calibration_tolerance;
                    let close = (0..2).all(|i| (u_cal[i] - u_new[i]).abs() <= tol * u_new[i].abs());
                    if close {
                        break;
                    }
                    u_ref = u_cal;
                }
                Err(_) => break,
            }
        }
        eps
    }

    fn onsager_matrix(&mut self, e: &Ensemble) -> Result<Matrix2<f64>> {
        match estimate_onsager(
            e,
            self.p,
            &self.k,
            self.eps,
            self.cfg.onsager_pairs,
            &mut self.rng,
        ) {
            Ok(l) if l[(0, 0)] > 0.0 => Ok(l),
            _ => self.attempts.estimate(),
        }
    }
}

impl Controller for InfoControl<'_> {
    fn kernel(&self) -> &JumpCov {
        &self.k
    }

    fn judge(&self, current: &Particle, prop: &Proposal, rho: f64) -> (f64, Particle) {
        let prob = accept_prob_informative(
            current.rho,
            rho,
            current.nu,
            prop.nu,
            self.eps_e[0],
            self.eps_e[1],
        );
        (prob, Particle::new(prop.theta.clone(), rho, prop.nu))
    }

    fn observe(&mut self, current: &Particle, prop: &Proposal) {
        let from = (current.rho, current.nu);
        let to = prop.rho.map(|r| (r, prop.nu));
        self.attempts
            .record(from, to.unwrap_or((f64::INFINITY, f64::INFINITY)), self.eps);
        if let Some(q) = &mut self.q {
            q.record_attempt(from, to);
        }
    }

    fn end_epoch(&mut self, e: &Ensemble, progress: &Progress) -> Result<()> {
        let (u_new, var_rho, cov, var_nu) = moments(e);
        let dt = progress.epoch_attempts as f64 / self.n as f64;
        let udot = (u_new - self.u) / dt;
        let s_irr = force(self.eps, self.eps_e).dot(&udot);
        self.eps = self.track(e, u_new, var_rho, cov, var_nu);
        self.u = u_new;
        if self.cfg.adapt_jump {
            self.k = adapted_kernel(e, self.cfg)?;
        }
        self.onsager = self.onsager_matrix(e)?;
        self.attempts.clear();
        let (e1, e2) = solve_force_quadratic(
            &self.onsager,
            self.eps[0],
            self.eps[1],
            self.cfg.a,
            self.cfg.v,
        )?;
        self.eps_e = Vector2::new(e1, e2);
        let row = self.row(progress, progress.epoch_accept_rate(), s_irr);
        self.trace.push(row);
        self.theta_means.push(theta_mean(e));
        Ok(())
    }
}

/// Two-intensity annealing for informative priors.
pub fn run_informative(model: &dyn Model, cfg: &RunConfig) -> Result<RunResult> {
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
    let q = BinGrid::from_prior(&p, cfg.qmatrix_bins.0, cfg.qmatrix_bins.1)
        .ok()
        .map(QMatrix::new);
    let mut ctl = InfoControl {
        cfg,
        p: &p,
        k,
        u: moments(&e).0,
        eps: Vector2::new(cfg.eps_init, 0.0),
        eps_e: Vector2::new(cfg.eps_init, 0.0),
        onsager: Matrix2::zeros(),
        attempts: OnsagerAccumulator::default(),
        q,
        rng: RngStream::new(cfg.seed, STREAM_ONSAGER),
        n: cfg.n,
        trace: Vec::new(),
        theta_means: vec![theta_mean(&e)],
    };
    ctl.onsager = ctl.onsager_matrix(&e)?;
    let (e1, e2) = solve_force_quadratic(&ctl.onsager, ctl.eps[0], ctl.eps[1], cfg.a, cfg.v)?;
    ctl.eps_e = Vector2::new(e1, e2);
    let mut progress = Progress::new(init_sims, cfg.accept_window);
    ctl.trace.push(ctl.row(&progress, f64::NAN, f64::NAN));

    let stepper = Stepper::new(model, cfg.seed, cfg.workers)?;
    let stop = random_scan(&stepper, cfg, &mut e, &mut ctl, &mut progress)?;

    let (eps1, eps2) = (ctl.eps[0], ctl.eps[1]);
    let logw: Vec<f64> = e
        .particles
        .iter()
        .map(|p| -cfg.delta * p.rho / eps1 + eps2 * p.nu)
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
            sims: progress.sims,
            init_sims,
            updates: progress.updates,
            accepted: progress.accepted,
            epochs: progress.epoch,
            prior_sample_size: p.len(),
            final_eps: vec![eps1, eps2],
            final_eps_e: vec![ctl.eps_e[0], ctl.eps_e[1]],
            ess: n_eff,
            stop,
        },
        trace: Trace::Informative(ctl.trace),
        theta_means: ctl.theta_means,
        initial_mean_rho,
        energy_cdf: None,
    })
}
