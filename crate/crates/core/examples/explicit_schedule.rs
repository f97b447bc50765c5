//! Annealing along a fixed power-law tolerance sequence, one sweep over the
//! ensemble per step.

use sabc::driver::{run_explicit, Algorithm, RunConfig};
use sabc::models::toy2_model;
use sabc::oracle::mann_kendall;
use sabc::schedule::ExplicitSchedule;

fn main() -> sabc::Result<()> {
    let cfg = RunConfig {
        algorithm: Algorithm::Explicit,
        n: 500,
        schedule: ExplicitSchedule::new(1.0, 2.0, 1)?,
        max_sweeps: Some(40),
        max_sims: 1_000_000,
        seed: 3,
        ..RunConfig::default()
    };
    let res = run_explicit(&toy2_model(3.0), &cfg)?;
    let means: Vec<f64> = res.theta_means.iter().map(|m| m[0]).collect();
    println!("start      mean theta {:.4}", means[0]);
    for (k, m) in means.iter().enumerate().skip(5).step_by(5) {
        println!(
            "sweep {k:3}  eps {:.5}  mean theta {m:.4}",
            cfg.schedule.epsilon(k as u64)
        );
    }
    let (s, z, p) = mann_kendall(&means);
    println!("Mann-Kendall S {s}  z {z:.2}  p {p:.2e}");
    println!(
        "final mean {:.4}, posterior mean 1.5",
        means.last().unwrap()
    );
    Ok(())
}
