//! Exact draws from the tempered target by rejection, checked against the
//! closed-form moments of the Gaussian benchmark.

use sabc::models::toy2_model;
use sabc::oracle::{
    ks_one_sample, mean_var, rejection_sample_pi_eps, toy2_pi_eps_cdf, toy2_pi_eps_moments,
};
use sabc::RngStream;

fn main() -> sabc::Result<()> {
    let y = 3.0;
    let model = toy2_model(y);
    let mut rng = RngStream::new(11, 0);
    for eps in [4.0, 1.0, 0.25] {
        let s = rejection_sample_pi_eps(&model, eps, 10_000, &mut rng)?;
        let theta = s.coordinate(0);
        let (m, v) = mean_var(&theta);
        let (em, ev) = toy2_pi_eps_moments(y, eps);
        let ks = ks_one_sample(&theta, |t| toy2_pi_eps_cdf(y, eps, t));
        println!(
            "eps {eps:5}: acceptance {:.4}  mean {m:.3} ({em:.3})  variance {v:.3} ({ev:.3})  KS {ks:.4}",
            s.acceptance_rate()
        );
    }
    Ok(())
}
