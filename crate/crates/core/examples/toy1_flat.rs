//! Flat-prior annealing on the bimodal benchmark, compared with its exact
//! posterior.

use sabc::driver::{run_flat, RunConfig};
use sabc::models::toy1_model;
use sabc::oracle::{ks_one_sample, mean_var, toy1_posterior_cdf, toy1_posterior_variance};

fn main() -> sabc::Result<()> {
    let cfg = RunConfig {
        n: 1000,
        v_over_gamma: Some(3.0),
        beta: 2.0,
        max_sims: 40_000,
        seed: 7,
        ..RunConfig::default()
    };
    let res = run_flat(&toy1_model(), &cfg)?;
    let theta: Vec<f64> = res.ensemble.particles.iter().map(|p| p.theta[0]).collect();
    let (mean, var) = mean_var(&theta);
    println!(
        "simulations {}  epochs {}  stop {:?}",
        res.totals.sims, res.totals.epochs, res.totals.stop
    );
    println!(
        "final U {:.3e}  eps_e {:.3e}  ESS {:.1}",
        res.totals.final_eps[0], res.totals.final_eps_e[0], res.totals.ess
    );
    println!(
        "mean {mean:.4}  variance {var:.4} (exact {:.4})",
        toy1_posterior_variance()
    );
    println!(
        "KS distance to posterior {:.4}",
        ks_one_sample(&theta, toy1_posterior_cdf)
    );
    Ok(())
}
