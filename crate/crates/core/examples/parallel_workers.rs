//! The same run with one and with four workers. Proposals draw from streams
//! keyed by the update counter, so both produce identical ensembles.

use std::time::Instant;

use sabc::driver::{run_flat, RunConfig};
use sabc::models::toy1_model;

fn main() -> sabc::Result<()> {
    let base = RunConfig {
        n: 1000,
        v_over_gamma: Some(3.0),
        max_sims: 40_000,
        seed: 7,
        ..RunConfig::default()
    };
    let mut results = Vec::new();
    for workers in [1, 4] {
        let start = Instant::now();
        let res = run_flat(
            &toy1_model(),
            &RunConfig {
                workers,
                ..base.clone()
            },
        )?;
        println!(
            "workers {workers}: {} sims in {:.3}s",
            res.totals.sims,
            start.elapsed().as_secs_f64()
        );
        results.push(res.ensemble.particles);
    }
    println!("identical ensembles: {}", results[0] == results[1]);
    Ok(())
}
