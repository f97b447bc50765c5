//! Particles, ensembles, weighting and resampling.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// One ensemble member. The simulated output itself is never stored: the
/// kernels only ever look at its distance to the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub theta: Vec<f64>,
    /// Raw distance to the data.
    pub rho: f64,
    /// Transformed energy `G(rho)`, only set by the flat-prior algorithm.
    pub u: Option<f64>,
    /// Prior potential `-ln f(theta)`.
    pub nu: f64,
}

impl Particle {
    pub fn new(theta: Vec<f64>, rho: f64, nu: f64) -> Self {
        Self {
            theta,
            rho,
            u: None,
            nu,
        }
    }

    pub fn with_energy(mut self, u: f64) -> Self {
        self.u = Some(u);
        self
    }
}

/// Fixed-size particle population.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub particles: Vec<Particle>,
    /// Number of accepted updates applied so far.
    pub generation: u64,
}

impl Ensemble {
    pub fn new(particles: Vec<Particle>) -> Self {
        Self {
            particles,
            generation: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.particles.first().map_or(0, |p| p.theta.len())
    }

    pub fn thetas(&self) -> Vec<Vec<f64>> {
        self.particles.iter().map(|p| p.theta.clone()).collect()
    }

    pub fn mean_rho(&self) -> f64 {
        mean(self.particles.iter().map(|p| p.rho))
    }

    pub fn mean_nu(&self) -> f64 {
        mean(self.particles.iter().map(|p| p.nu))
    }

    /// Mean transformed energy. Particles without an energy count as 0.
    pub fn mean_energy(&self) -> f64 {
        mean(self.particles.iter().map(|p| p.u.unwrap_or(0.0)))
    }

    /// Mean of parameter component `i`.
    pub fn mean_theta(&self, i: usize) -> f64 {
        mean(self.particles.iter().map(|p| p.theta[i]))
    }

    pub fn replace(&mut self, index: usize, particle: Particle) {
        self.particles[index] = particle;
        self.generation += 1;
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorRecord {
    pub theta: Vec<f64>,
    pub rho: f64,
    pub nu: f64,
}

/// Every joint-prior draw made while building the initial ensemble.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PriorSample {
    pub records: Vec<PriorRecord>,
}

impl PriorSample {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn rhos(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.rho).collect()
    }
}

/// Effective sample size `(sum w)^2 / sum w^2`.
pub fn ess(weights: &[f64]) -> Result<f64> {
    let (mut s1, mut s2) = (0.0, 0.0);
    let scale = weights.iter().cloned().fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    for &w in weights {
        if w < 0.0 || w.is_nan() {
            return Err(Error::InvalidArgument(format!(
                "negative or NaN weight {w}"
            )));
        }
        let w = w / scale;
        s1 += w;
        s2 += w * w;
    }
    Ok(s1 * s1 / s2)
}

/// Resampling scheme used for bias correction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resampler {
    #[default]
    Systematic,
    Multinomial,
}

/// Indices of `weights.len()` draws with replacement, probability proportional to weight.
pub fn resample_indices(
    weights: &[f64],
    scheme: Resampler,
    rng: &mut RngStream,
) -> Result<Vec<usize>> {
    ess(weights)?;
    let n = weights.len();
    let total: f64 = weights.iter().sum();
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    for w in weights {
        acc += w / total;
        cumulative.push(acc);
    }
    // guard against the last partial sum falling short of 1
    if let Some(last) = cumulative.last_mut() {
        *last = f64::INFINITY;
    }
    let find = |x: f64| cumulative.partition_point(|&c| c <= x).min(n - 1);
    let out = match scheme {
        Resampler::Systematic => {
            let start: f64 = rng.random::<f64>() / n as f64;
            (0..n).map(|k| find(start + k as f64 / n as f64)).collect()
        }
        Resampler::Multinomial => (0..n).map(|_| find(rng.random::<f64>())).collect(),
    };
    Ok(out)
}

pub fn resample(
    e: &Ensemble,
    weights: &[f64],
    scheme: Resampler,
    rng: &mut RngStream,
) -> Result<Ensemble> {
    if weights.len() != e.len() {
        return Err(Error::DimensionMismatch {
            expected: e.len(),
            got: weights.len(),
        });
    }
    let idx = resample_indices(weights, scheme, rng)?;
    Ok(Ensemble {
        particles: idx.into_iter().map(|i| e.particles[i].clone()).collect(),
        generation: e.generation,
    })
}

/// Weights `exp(-delta * u / eps)` that pull an ensemble at temperature `eps`
/// down to `eps / (1 + delta)`.
pub fn bias_correction_weights_flat(e: &Ensemble, delta: f64, eps: f64) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if delta < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "delta must be >= 0, got {delta}"
        )));
    }
    e.particles
        .iter()
        .map(|p| {
            p.u.map(|u| (-delta * u / eps).exp())
                .ok_or_else(|| Error::InvalidArgument("particle carries no energy u".into()))
        })
        .collect()
}

/// Weights `exp(eps2 * nu)` that turn the `(1 + eps2)`-tempered prior back into the prior.
pub fn bias_correction_weights_prior(e: &Ensemble, eps2: f64) -> Vec<f64> {
    e.particles.iter().map(|p| (eps2 * p.nu).exp()).collect()
}

/// Unbiased sample covariance of row vectors.
pub fn empirical_cov(values: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = values.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let d = values[0].len();
    let mut mean = vec![0.0; d];
    for v in values {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: v.len(),
            });
        }
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = DMatrix::zeros(d, d);
    for v in values {
        for i in 0..d {
            let di = v[i] - mean[i];
            for j in i..d {
                cov[(i, j)] += di * (v[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let c = cov[(i, j)] / (n - 1) as f64;
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
    }
    Ok(cov)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the particle table `theta_1,...,theta_d,rho,u,nu,weight`.
pub fn write_particles_csv<W: Write>(
    out: W,
    particles: &[Particle],
    weights: Option<&[f64]>,
) -> Result<()> {
    let d = particles.first().map_or(0, |p| p.theta.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=d).map(|i| format!("theta_{i}")).collect();
    header.extend(["rho", "u", "nu", "weight"].map(String::from));
    w.write_record(&header)?;
    for (i, p) in particles.iter().enumerate() {
        let mut row: Vec<String> = p.theta.iter().map(|x| x.to_string()).collect();
        row.push(p.rho.to_string());
        row.push(fmt_opt(p.u));
        row.push(p.nu.to_string());
        row.push(weights.map_or(1.0, |ws| ws[i]).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a particle table written by [`write_particles_csv`].
pub fn read_particles_csv<R: Read>(input: R) -> Result<(Vec<Particle>, Vec<f64>)> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let d = headers.iter().filter(|h| h.starts_with("theta_")).count();
    if headers.len() != d + 4 {
        return Err(Error::Config(format!(
            "unexpected particle header {headers:?}"
        )));
    }
    let parse = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|e| Error::Config(format!("bad number {s:?}: {e}")))
    };
    let mut particles = Vec::new();
    let mut weights = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let theta = (0..d).map(|i| parse(&rec[i])).collect::<Result<Vec<_>>>()?;
        let u = match &rec[d + 1] {
            "" => None,
            s => Some(parse(s)?),
        };
        particles.push(Particle {
            theta,
            rho: parse(&rec[d])?,
            u,
            nu: parse(&rec[d + 2])?,
        });
        weights.push(parse(&rec[d + 3])?);
    }
    Ok((particles, weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ens(n: usize) -> Ensemble {
        Ensemble::new(
            (0..n)
                .map(|i| Particle::new(vec![i as f64], i as f64 * 0.1, 0.0).with_energy(0.5))
                .collect(),
        )
    }

    #[test]
    fn ess_examples() {
        assert_relative_eq!(ess(&[1.0, 1.0, 1.0, 1.0]).unwrap(), 4.0);
        assert_relative_eq!(ess(&[1.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_relative_eq!(ess(&[2.0, 1.0, 1.0]).unwrap(), 16.0 / 6.0, epsilon = 1e-12);
        assert!(matches!(ess(&[0.0, 0.0]), Err(Error::DegenerateWeights)));
        assert!(matches!(ess(&[]), Err(Error::DegenerateWeights)));
    }

    #[test]
    fn point_mass_resamples_to_copies() {
        let e = ens(5);
        let mut w = vec![0.0; 5];
        w[3] = 1.0;
        for scheme in [Resampler::Systematic, Resampler::Multinomial] {
            let mut rng = RngStream::new(1, 0);
            let r = resample(&e, &w, scheme, &mut rng).unwrap();
            assert_eq!(r.len(), 5);
            assert!(r.particles.iter().all(|p| *p == e.particles[3]));
        }
    }

    #[test]
    fn resample_rejects_bad_weights() {
        let e = ens(3);
        let mut rng = RngStream::new(1, 0);
        assert!(resample(&e, &[0.0; 3], Resampler::Systematic, &mut rng).is_err());
        assert!(resample(&e, &[1.0; 2], Resampler::Systematic, &mut rng).is_err());
    }

    #[test]
    fn expected_copy_counts() {
        // multinomial mean N w_i / sum w; check over 10^4 replicates at 3 sigma
        let w = [0.1, 0.2, 0.3, 0.4];
        let reps = 10_000;
        for scheme in [Resampler::Systematic, Resampler::Multinomial] {
            let mut rng = RngStream::new(9, 1);
            let mut counts = [0.0f64; 4];
            for _ in 0..reps {
                for i in resample_indices(&w, scheme, &mut rng).unwrap() {
                    counts[i] += 1.0;
                }
            }
            for i in 0..4 {
                let expected = 4.0 * w[i];
                let mean = counts[i] / reps as f64;
                // multinomial variance bounds the systematic one
                let sd = (4.0 * w[i] * (1.0 - w[i]) / reps as f64).sqrt();
                assert!((mean - expected).abs() < 3.0 * sd, "{scheme:?} {i}: {mean}");
            }
        }
    }

    #[test]
    fn flat_weights() {
        let e = ens(3);
        let w = bias_correction_weights_flat(&e, 0.0, 0.3).unwrap();
        assert_eq!(w, vec![1.0; 3]);
        assert_relative_eq!(ess(&w).unwrap(), 3.0);
        let w = bias_correction_weights_flat(&e, 1.0, 0.5).unwrap();
        assert_relative_eq!(w[0], (-1.0f64).exp(), epsilon = 1e-15);
        assert!(bias_correction_weights_flat(&e, 1.0, 0.0).is_err());
        let bare = Ensemble::new(vec![Particle::new(vec![0.0], 0.0, 0.0)]);
        assert!(bias_correction_weights_flat(&bare, 1.0, 1.0).is_err());
    }

    #[test]
    fn prior_weights() {
        let e = Ensemble::new(vec![
            Particle::new(vec![0.0], 0.0, 0.0),
            Particle::new(vec![0.0], 0.0, 2f64.ln()),
        ]);
        assert_eq!(bias_correction_weights_prior(&e, 0.0), vec![1.0, 1.0]);
        let w = bias_correction_weights_prior(&e, 1.0);
        assert_relative_eq!(w[0], 1.0);
        assert_relative_eq!(w[1], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn covariance_examples() {
        let c = empirical_cov(&vec![vec![1.0, 2.0]; 5]).unwrap();
        assert!(c.iter().all(|&x| x == 0.0));
        let c = empirical_cov(&[vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0]));
        assert!(matches!(
            empirical_cov(&[vec![1.0]]),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn covariance_of_gaussian_sample() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = RngStream::new(3, 0);
        let n = 20_000;
        // x = z1, y = 0.5 z1 + z2  =>  cov [[1, .5], [.5, 1.25]]
        let values: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let z1: f64 = StandardNormal.sample(&mut rng);
                let z2: f64 = StandardNormal.sample(&mut rng);
                vec![z1, 0.5 * z1 + z2]
            })
            .collect();
        let c = empirical_cov(&values).unwrap();
        let tol = 4.0 * (2.0 / n as f64).sqrt() * 1.25;
        assert!((c[(0, 0)] - 1.0).abs() < tol);
        assert!((c[(0, 1)] - 0.5).abs() < tol);
        assert!((c[(1, 1)] - 1.25).abs() < tol);
        assert_eq!(c[(0, 1)], c[(1, 0)]);
    }

    #[test]
    fn csv_round_trip() {
        let mut e = ens(3);
        e.particles[1].u = None;
        e.particles[2].nu = -1.25;
        let mut buf = Vec::new();
        write_particles_csv(&mut buf, &e.particles, Some(&[1.0, 0.5, 0.25])).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("theta_1,rho,u,nu,weight\n"));
        let (ps, ws) = read_particles_csv(buf.as_slice()).unwrap();
        assert_eq!(ps, e.particles);
        assert_eq!(ws, vec![1.0, 0.5, 0.25]);
    }
}
