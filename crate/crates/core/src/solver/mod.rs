//! Simulated thermodynamic linear-algebra hardware.
//!
//! The device state `x` follows the Ornstein-Uhlenbeck dynamics
//! `dx = -(M x - b) dt + N(0, 2/beta dt)`, whose stationary law is
//! `N(M^{-1} b, M^{-1} / beta)`. Linear systems are solved from the time
//! average of the trajectory after burn-in, inverses from `beta` times the
//! covariance of the readouts.

mod gram;
mod hardware;
mod ou;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SpdReport;

pub use gram::GramOperator;
pub use hardware::{analog_runtime_estimate, relaxation_time, HardwareModel};
pub use ou::{thermo_inverse, thermo_solve, thermo_solve_gram, thermo_solve_operator};

/// Knobs of the OU simulation. Times are dimensionless (units of `RC`);
/// `burn_in` and `sample_spacing` are multiples of the relaxation time
/// `tau = 1 / alpha_min` of the damped operator. The sampling window lasts
/// `n_samples * sample_spacing` and ends with the last readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Fixed integration step. `None` uses `dt_fraction / alpha_max`.
    pub dt: Option<f64>,
    pub dt_fraction: f64,
    /// Inverse temperature `beta` of the noise source.
    pub inverse_temperature: f64,
    pub burn_in: f64,
    pub n_samples: usize,
    pub sample_spacing: f64,
    /// Added to the operator inside the solver: the drift uses `M + damping I`.
    pub damping: f64,
    pub seed: u64,
    /// Stream index; independent solves sharing a seed use distinct streams.
    pub stream: u64,
    /// Refuse runs longer than this many integration steps.
    pub max_steps: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: None,
            dt_fraction: 1.0,
            inverse_temperature: 1.0,
            burn_in: 5.0,
            n_samples: 100_000,
            sample_spacing: 2.0,
            damping: 0.0,
            seed: 0,
            stream: 0,
            max_steps: 20_000_000_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::invalid(format!("dt must be positive, got {dt}")));
            }
        }
        if !(self.dt_fraction > 0.0) || !self.dt_fraction.is_finite() {
            return Err(Error::invalid(format!(
                "dt_fraction must be positive, got {}",
                self.dt_fraction
            )));
        }
        if !(self.inverse_temperature > 0.0) || !self.inverse_temperature.is_finite() {
            return Err(Error::invalid(format!(
                "inverse temperature must be positive, got {}",
                self.inverse_temperature
            )));
        }
        if self.n_samples < 1 {
            return Err(Error::invalid("n_samples must be at least 1"));
        }
        if !(self.damping >= 0.0) || !self.damping.is_finite() {
            return Err(Error::invalid(format!(
                "damping must be nonnegative, got {}",
                self.damping
            )));
        }
        if !(self.burn_in >= 0.0) || !self.burn_in.is_finite() {
            return Err(Error::invalid(format!(
                "burn_in must be nonnegative, got {}",
                self.burn_in
            )));
        }
        if !(self.sample_spacing > 0.0) || !self.sample_spacing.is_finite() {
            return Err(Error::invalid(format!(
                "sample_spacing must be positive, got {}",
                self.sample_spacing
            )));
        }
        Ok(())
    }

    /// Same configuration on another random stream.
    pub fn with_stream(&self, stream: u64) -> Self {
        Self {
            stream,
            ..self.clone()
        }
    }
}

/// Result of one simulated solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveEstimate<S> {
    pub solution: S,
    /// Per-coordinate variance of the retained device states.
    pub sample_variance: Vec<f64>,
    /// Model-predicted wall-clock of the analog solve, seconds.
    pub analog_time: f64,
    pub samples_used: usize,
    /// Integration steps simulated, burn-in included.
    pub steps: u64,
    pub dt: f64,
    /// Spectral estimate of the damped operator.
    pub spectrum: SpdReport,
}
