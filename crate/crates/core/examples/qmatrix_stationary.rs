//! Binned transition matrix of attempted moves and its stationary vector.
//!
//! Prior draws of the Gaussian benchmark are moved with a symmetric random
//! walk; every attempt is recorded on the (distance, prior potential) grid.
//! The stationary vector of the normalised matrix approximates the density of
//! states, from which mean energies at any intensity follow.

use nalgebra::Vector2;
use rand::Rng;
use rand_distr::StandardNormal;
use sabc::ensemble::{PriorRecord, PriorSample};
use sabc::models::{toy2_model, Model};
use sabc::qmatrix::{moments_from_g, stationary_vector, BinGrid, QMatrix};
use sabc::RngStream;

fn main() -> sabc::Result<()> {
    let model = toy2_model(3.0);
    let mut rng = RngStream::new(5, 0);
    let mut prior = PriorSample::default();
    for _ in 0..5_000 {
        let theta = model.sample_prior(&mut rng);
        let rho = model.simulate_distance(&theta, &mut rng);
        prior.records.push(PriorRecord {
            nu: model.prior_potential(&theta),
            theta,
            rho,
        });
    }
    let grid = BinGrid::from_prior(&prior, 20, 20)?;
    let mut q = QMatrix::new(grid.clone());
    for r in &prior.records {
        for _ in 0..20 {
            let step: f64 = rng.sample(StandardNormal);
            let theta = vec![r.theta[0] + 0.5 * step];
            let rho = model.simulate_distance(&theta, &mut rng);
            q.record_attempt((r.rho, r.nu), Some((rho, model.prior_potential(&theta))));
        }
    }
    let chain = q.normalized()?;
    let seeds: Vec<usize> = prior
        .records
        .iter()
        .filter_map(|r| grid.bin_of(r.rho, r.nu))
        .collect();
    let g = stationary_vector(&chain, &seeds)?;
    println!(
        "{} occupied bins, {} recorded attempts",
        chain.len(),
        q.total()
    );
    for eps1 in [4.0, 1.0, 0.5] {
        let (u, l) = moments_from_g(&g, &chain, &grid, Vector2::new(eps1, 0.0))?;
        println!(
            "eps1 {eps1:4}: U1 {:.3}  U2 {:.3}  L11 {:.3}",
            u[0],
            u[1],
            l[(0, 0)]
        );
    }
    Ok(())
}
