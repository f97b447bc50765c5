//! Control law for the flat-prior algorithm.
//!
//! With energies equalised to temperatures (`U ~ eps`), the energy flux is
//! approximately `dU/dt = -gamma (eps^2 - eps_e^2)` and the force is
//! `1/eps - 1/eps_e`. Holding `dU/dt * dF/d(dU/dt) * dU/dt = v` fixed yields the
//! quartic `(U^2 - eps_e^2)^2 / (2 eps_e^3) = v / gamma`.

use crate::error::{Error, Result};
use crate::kernel::{jump_density, JumpCov};

/// Mean energy `U(eps)` of `exp(-u/eps)` on `[0, 1]`.
///
/// Closed form `eps - 1/(e^(1/eps) - 1)`; the Bernoulli series is used for
/// large `eps` where the two terms cancel.
pub fn mean_energy_of_temperature(eps: f64) -> f64 {
    if eps <= 0.0 {
        return 0.0;
    }
    if eps == f64::INFINITY {
        return 0.5;
    }
    let t = 1.0 / eps;
    if t < 0.1 {
        let t2 = t * t;
        0.5 - t / 12.0 + t * t2 / 720.0 - t * t2 * t2 / 30240.0 + t * t2 * t2 * t2 / 1_209_600.0
    } else {
        eps - 1.0 / t.exp_m1()
    }
}

/// Inverse of [`mean_energy_of_temperature`]; `+inf` for `U >= 1/2`.
pub fn temperature_of_mean_energy(u: f64) -> f64 {
    if !(u > 0.0) {
        return 0.0;
    }
    if u >= 0.5 {
        return f64::INFINITY;
    }
    // U(eps) is increasing and U(eps) <= eps, so eps lies in [U, ...).
    let (mut lo, mut hi) = (u, u.max(1.0));
    while mean_energy_of_temperature(hi) < u {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mean_energy_of_temperature(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Jump-density average over ensemble pairs, the flux coefficient `gamma`.
///
/// The integral defining `gamma` is `E[k(theta, theta')]` for independent
/// posterior draws; ensemble members stand in for those draws. At most
/// `10^4` pairs are visited, on fixed index offsets.
pub fn estimate_gamma(thetas: &[Vec<f64>], k: &JumpCov) -> Result<f64> {
    const MAX_PAIRS: usize = 10_000;
    let n = thetas.len();
    if n == 0 {
        return Err(Error::Empty("parameter vectors"));
    }
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let pairs = MAX_PAIRS.min(n * (n - 1));
    let offsets = pairs.div_ceil(n);
    let stride = ((n - 1) / offsets).max(1);
    let sum: f64 = (0..pairs)
        .map(|t| {
            let i = t % n;
            let j = (i + 1 + (t / n) * stride) % n;
            jump_density(k, &thetas[i], &thetas[j])
        })
        .sum();
    Ok(sum / pairs as f64)
}

fn lead_term(u: f64, v_over_gamma: f64) -> f64 {
    (1.0 / (2.0 * v_over_gamma)).cbrt() * u.powf(4.0 / 3.0)
}

/// Root `eps_e` in `(0, U)` of `(U^2 - eps_e^2)^2 / (2 eps_e^3) = v / gamma`.
///
/// Newton on the logarithm of the left side, seeded with the small-`U`
/// leading term and kept inside a shrinking bracket (bisection whenever a step
/// leaves it).
pub fn solve_quartic(u: f64, v_over_gamma: f64) -> Result<f64> {
    const MAX_ITER: usize = 200;
    if !(u > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "U must be positive, got {u}"
        )));
    }
    if v_over_gamma < 0.0 || v_over_gamma.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "v/gamma must be non-negative, got {v_over_gamma}"
        )));
    }
    let u = if u >= 1.0 { 1.0 - 1e-9 } else { u };
    if v_over_gamma == 0.0 {
        return Ok(u);
    }
    let ln_c = v_over_gamma.ln();
    let u2 = u * u;
    // phi is strictly decreasing on (0, U): +inf at 0, -inf at U
    let phi = |e: f64| 2.0 * (u2 - e * e).ln() - std::f64::consts::LN_2 - 3.0 * e.ln() - ln_c;
    let dphi = |e: f64| -4.0 * e / (u2 - e * e) - 3.0 / e;

    let lead = lead_term(u, v_over_gamma);
    let mut lo = (lead / 10.0).min(0.5 * u);
    while phi(lo) <= 0.0 {
        lo /= 10.0;
        if lo < f64::MIN_POSITIVE {
            return Err(Error::NoConvergence {
                what: "quartic bracket",
                iterations: 0,
            });
        }
    }
    let mut hi = u;
    let mut e = if lead > lo && lead < u {
        lead
    } else {
        0.5 * (lo + hi)
    };
    for _ in 0..MAX_ITER {
        let f = phi(e);
        if f == 0.0 {
            return Ok(e);
        }
        if f > 0.0 {
            lo = e;
        } else {
            hi = e;
        }
        let step = f / dphi(e);
        let mut next = e - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - e).abs() <= 4.0 * f64::EPSILON * e || hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(next);
        }
        e = next;
    }
    Err(Error::NoConvergence {
        what: "quartic schedule",
        iterations: MAX_ITER,
    })
}

/// `eps_e = sqrt(U^2 + Udot / gamma)`, the control temperature implied by a flux.
pub fn flat_epsilon_from_flux(u: f64, udot: f64, gamma: f64) -> Result<f64> {
    let radicand = u * u + udot / gamma;
    if radicand < 0.0 || radicand.is_nan() {
        return Err(Error::LinearRegimeViolated(radicand));
    }
    Ok(radicand.sqrt())
}

/// Flux `dU/dt = -gamma (eps^2 - eps_e^2)`.
pub fn flat_flux(eps: f64, eps_e: f64, gamma: f64) -> f64 {
    -gamma * (eps * eps - eps_e * eps_e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn temperature_inverts_mean_energy() {
        for &eps in &[1e-4, 0.01, 0.3, 1.0, 20.0] {
            let u = mean_energy_of_temperature(eps);
            assert_relative_eq!(temperature_of_mean_energy(u), eps, max_relative = 1e-9);
        }
        assert_eq!(temperature_of_mean_energy(0.5), f64::INFINITY);
    }

    fn quad_mean_energy(eps: f64) -> f64 {
        // composite Simpson on [0, 1]
        let n = 2000;
        let h = 1.0 / n as f64;
        let (mut a, mut b) = (0.0, 0.0);
        for i in 0..=n {
            let x = i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let f = (-x / eps).exp();
            a += w * x * f;
            b += w * f;
        }
        a / b
    }

    #[test]
    fn mean_energy_values() {
        assert_relative_eq!(
            mean_energy_of_temperature(1.0),
            0.418_023_293_13,
            epsilon = 1e-10
        );
        assert_relative_eq!(mean_energy_of_temperature(0.01), 0.01, epsilon = 1e-12);
        assert_relative_eq!(mean_energy_of_temperature(1e12), 0.5, epsilon = 1e-12);
        assert_eq!(mean_energy_of_temperature(f64::INFINITY), 0.5);
        for eps in [0.05, 0.2, 0.5, 3.0, 9.9, 10.1, 50.0] {
            assert_relative_eq!(
                mean_energy_of_temperature(eps),
                quad_mean_energy(eps),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn mean_energy_is_increasing() {
        let mut last = 0.0;
        for i in 1..2000 {
            let eps = 1e-4 * 1.01f64.powi(i);
            let u = mean_energy_of_temperature(eps);
            assert!(u > last && u < 0.5, "eps={eps}");
            last = u;
        }
    }

    #[test]
    fn quartic_examples() {
        assert_eq!(solve_quartic(0.3, 0.0).unwrap(), 0.3);
        let e = solve_quartic(0.01, 3.0).unwrap();
        assert_relative_eq!(e, 1.174_698_710_893e-3, max_relative = 1e-9);
        let lead = (1.0f64 / 6.0).cbrt() * 0.01f64.powf(4.0 / 3.0);
        assert!((e / lead - 1.0).abs() < 0.02);
        assert!(solve_quartic(0.0, 1.0).is_err());
    }

    #[test]
    fn quartic_residual_and_monotonicity() {
        for &c in &[0.01, 0.3, 3.0, 7.0, 100.0] {
            let mut last = 0.0;
            for i in 1..=60 {
                let u = 1e-5 * 1.2f64.powi(i);
                if u >= 1.0 {
                    break;
                }
                let e = solve_quartic(u, c).unwrap();
                assert!(e > 0.0 && e < u);
                let lhs = (u * u - e * e).powi(2) / (2.0 * e.powi(3));
                assert!(
                    (lhs - c).abs() <= 1e-12 * c.max(1.0),
                    "U={u} c={c} lhs={lhs}"
                );
                assert!(e > last);
                last = e;
            }
        }
    }

    #[test]
    fn flux_identities() {
        assert_eq!(flat_epsilon_from_flux(0.3, 0.0, 2.0).unwrap(), 0.3);
        let g = 0.7;
        assert_relative_eq!(
            flat_epsilon_from_flux(0.1, -g * 0.0051, g).unwrap(),
            0.07,
            epsilon = 1e-12
        );
        assert!(matches!(
            flat_epsilon_from_flux(0.1, -1.0, 1.0),
            Err(Error::LinearRegimeViolated(_))
        ));
    }

    #[test]
    fn quartic_keeps_entropy_production_constant() {
        // closed loop: eps_e from the quartic, flux from the quadratic law, then
        // Udot * dF/dUdot * Udot with dF/dUdot = 1 / (2 gamma eps_e^3) must equal v
        let gamma = 0.37;
        for &v in &[0.05, 0.3, 2.0] {
            for &u in &[1e-3, 1e-2, 0.1] {
                let e = solve_quartic(u, v / gamma).unwrap();
                let udot = flat_flux(u, e, gamma);
                let back = flat_epsilon_from_flux(u, udot, gamma).unwrap();
                assert_relative_eq!(back, e, max_relative = 1e-10);
                let rate = udot * udot / (2.0 * gamma * e.powi(3));
                assert_relative_eq!(rate, v, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn gamma_examples() {
        let k = JumpCov::isotropic(1, 1.0).unwrap();
        let same = vec![vec![0.4]; 50];
        assert_relative_eq!(
            estimate_gamma(&same, &k).unwrap(),
            0.398_942_280_4,
            epsilon = 1e-9
        );
        let k4 = JumpCov::isotropic(1, 4.0).unwrap();
        assert_relative_eq!(
            estimate_gamma(&same, &k4).unwrap(),
            0.398_942_280_4 / 2.0,
            epsilon = 1e-9
        );
        assert!(estimate_gamma(&[], &k).is_err());
        assert!(estimate_gamma(&[vec![0.0]], &k).is_err());

        let mut rng = crate::rng::RngStream::new(5, 0);
        let draws: Vec<Vec<f64>> = (0..4000)
            .map(|_| vec![StandardNormal.sample(&mut rng)])
            .collect();
        let g = estimate_gamma(&draws, &k).unwrap();
        assert!(
            (g - 1.0 / (6.0 * std::f64::consts::PI).sqrt()).abs() < 0.01,
            "{g}"
        );
    }
}
