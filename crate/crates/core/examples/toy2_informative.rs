//! Informative-prior annealing on the Gaussian benchmark with the data in the
//! prior tail (y = 3), compared with the exact posterior N(1.5, 0.5).

use sabc::driver::{run_informative, Algorithm, RunConfig};
use sabc::models::toy2_model;
use sabc::oracle::mean_var;
use sabc::schedule::Trace;

fn main() -> sabc::Result<()> {
    let model = toy2_model(3.0);
    let cfg = RunConfig {
        algorithm: Algorithm::AdaptiveInformative,
        n: 1000,
        eps_init: 4.0,
        v: 0.3,
        a: 2.0,
        delta: 0.5,
        max_sims: 40_000,
        stop_accept_rate: 0.0,
        seed: 7,
        ..RunConfig::default()
    };
    let res = run_informative(&model, &cfg)?;
    if let Trace::Informative(rows) = &res.trace {
        println!("epoch   eps1      eps2     eps1_e    S_irr_rate");
        for r in rows.iter().step_by(10) {
            println!(
                "{:5} {:9.4} {:9.4} {:9.4} {:9.4}",
                r.epoch, r.eps1, r.eps2, r.eps1_e, r.s_irr_rate
            );
        }
    }
    let theta: Vec<f64> = res.ensemble.particles.iter().map(|p| p.theta[0]).collect();
    let (mean, var) = mean_var(&theta);
    println!("simulations {}  ESS {:.1}", res.totals.sims, res.totals.ess);
    println!(
        "mean {mean:.3} (exact {:.3})  variance {var:.3} (exact {:.3})",
        model.posterior_mean(),
        model.posterior_variance()
    );
    Ok(())
}
