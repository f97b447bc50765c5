//! Birth-death-mutation model of tuberculosis transmission fitted to the
//! San Francisco genotype cluster data.

use sabc::driver::{run_flat, RunConfig};
use sabc::models::{tb_model, TbData};
use sabc::schedule::Trace;

fn main() -> sabc::Result<()> {
    let data = TbData::observed();
    println!(
        "observed: {} isolates, {} genotypes, diversity {:.4}",
        data.sample_size, data.distinct, data.diversity
    );
    let cfg = RunConfig {
        n: 200,
        v_over_gamma: Some(7.0),
        delta: 0.2,
        max_sims: 2_000,
        seed: 0,
        ..RunConfig::default()
    };
    let res = run_flat(&tb_model(), &cfg)?;
    if let Trace::Flat(rows) = &res.trace {
        for r in rows.iter().step_by(4) {
            println!(
                "epoch {:3}  sims {:5}  U {:.4}  eps_e {:.4}",
                r.epoch, r.sims, r.u, r.eps_e
            );
        }
    }
    let (a, d) = (res.ensemble.mean_theta(0), res.ensemble.mean_theta(1));
    println!(
        "posterior means: birth {a:.3}  death {d:.3}  mutation {:.3}",
        1.0 - a - d
    );
    println!(
        "mean distance {:.4} -> {:.4}  ESS {:.1}",
        res.initial_mean_rho,
        res.weighted.mean_rho(),
        res.totals.ess
    );
    Ok(())
}
