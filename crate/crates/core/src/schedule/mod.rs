//! Annealing control laws and per-epoch diagnostics.

mod explicit;
mod flat;
mod informative;
mod trace;

pub use explicit::{explicit_epsilon, ExplicitSchedule};
pub use flat::{
    estimate_gamma, flat_epsilon_from_flux, flat_flux, mean_energy_of_temperature, solve_quartic,
    temperature_of_mean_energy,
};
pub use informative::{
    calibrate_u_of_eps, estimate_onsager, force, jacobi_matrix, solve_force_quadratic,
    update_intensities, InfoScheduleState, OnsagerAccumulator,
};
pub use trace::{FlatTraceRow, InfoTraceRow, Trace};

use crate::error::{Error, Result};

/// State of the flat-prior control.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlatScheduleState {
    /// Ensemble mean energy, which also tracks the system temperature.
    pub u: f64,
    pub eps_e: f64,
    pub gamma: f64,
    pub v_over_gamma: f64,
}

impl FlatScheduleState {
    /// Refreshes `U` and the control temperature.
    pub fn update(&mut self, u: f64) -> Result<()> {
        self.u = u;
        self.eps_e = solve_quartic(u, self.v_over_gamma)?;
        Ok(())
    }

    pub fn force(&self) -> f64 {
        1.0 / self.u - 1.0 / self.eps_e
    }
}

/// Entropy production rate `F . dU/dt`.
pub fn entropy_production_rate(force: &[f64], udot: &[f64]) -> Result<f64> {
    if force.len() != udot.len() {
        return Err(Error::DimensionMismatch {
            expected: force.len(),
            got: udot.len(),
        });
    }
    Ok(force.iter().zip(udot).map(|(f, u)| f * u).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn entropy_rate_examples() {
        assert_eq!(
            entropy_production_rate(&[0.0, 0.0], &[0.3, -1.0]).unwrap(),
            0.0
        );
        let r = entropy_production_rate(&[-0.2], &[-0.2]).unwrap();
        assert_relative_eq!(r, 0.04, epsilon = 1e-15);
        assert!(r >= 0.0);
        assert!(entropy_production_rate(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn flat_state_update() {
        let mut s = FlatScheduleState {
            u: 0.5,
            eps_e: 0.5,
            gamma: 1.0,
            v_over_gamma: 3.0,
        };
        s.update(0.01).unwrap();
        assert_relative_eq!(s.eps_e, 1.174_698_710_893e-3, max_relative = 1e-9);
        assert!(s.force() < 0.0);
    }
}
