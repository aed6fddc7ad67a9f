//! Analog timing model for the RC-circuit solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Circuit and I/O characteristics feeding every timing estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardwareModel {
    /// Resistance scale in ohms.
    pub resistance: f64,
    /// Capacitance in farads.
    pub capacitance: f64,
    /// Characteristic timescale RC in seconds.
    pub rc_time: f64,
    /// Digital transfer speed in bits per second.
    pub transfer_bandwidth: f64,
    /// Bits per transferred matrix or vector entry.
    pub io_bits: u32,
    /// Number of right-hand sides solved concurrently.
    pub parallel_solves: usize,
    /// Relaxation times waited per solve before reading out.
    pub settle_relaxations: f64,
}

impl Default for HardwareModel {
    fn default() -> Self {
        Self {
            resistance: 1e3,
            capacitance: 1e-9,
            rc_time: 1e-6,
            transfer_bandwidth: 5e10,
            io_bits: 16,
            parallel_solves: 1,
            settle_relaxations: 5.0,
        }
    }
}

impl HardwareModel {
    /// Model with `rc_time = resistance * capacitance`.
    pub fn from_rc(resistance: f64, capacitance: f64) -> Self {
        Self {
            resistance,
            capacitance,
            rc_time: resistance * capacitance,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rc_time > 0.0) {
            return Err(Error::invalid(format!(
                "rc_time must be positive, got {}",
                self.rc_time
            )));
        }
        if !(self.transfer_bandwidth > 0.0) {
            return Err(Error::invalid(format!(
                "transfer_bandwidth must be positive, got {}",
                self.transfer_bandwidth
            )));
        }
        if self.io_bits < 1 {
            return Err(Error::invalid("io_bits must be at least 1"));
        }
        if self.parallel_solves < 1 {
            return Err(Error::invalid("parallel_solves must be at least 1"));
        }
        if !(self.settle_relaxations >= 0.0) {
            return Err(Error::invalid("settle_relaxations must be nonnegative"));
        }
        Ok(())
    }

    /// Seconds to move `entries` values across the digital link.
    pub fn transfer_time(&self, entries: f64) -> f64 {
        entries * f64::from(self.io_bits) / self.transfer_bandwidth
    }
}

/// Time for the circuit to relax, `RC / alpha_min`.
pub fn relaxation_time(alpha_min: f64, hw: &HardwareModel) -> Result<f64> {
    if !(alpha_min > 0.0) || !alpha_min.is_finite() {
        return Err(Error::invalid(format!(
            "alpha_min must be positive and finite, got {alpha_min}"
        )));
    }
    Ok(hw.rc_time / alpha_min)
}

/// Wall-clock estimate for solving `n_systems` right-hand sides against one
/// `n x n` matrix: upload the matrix and right-hand sides, settle each batch of
/// `parallel_solves` systems, download the solutions.
pub fn analog_runtime_estimate(
    n: usize,
    n_systems: usize,
    alpha_min: f64,
    hw: &HardwareModel,
) -> Result<f64> {
    if n == 0 || n_systems == 0 {
        return Err(Error::invalid(format!(
            "need n >= 1 and n_systems >= 1, got n={n}, n_systems={n_systems}"
        )));
    }
    hw.validate()?;
    let tau = relaxation_time(alpha_min, hw)?;
    let (n, k) = (n as f64, n_systems as f64);
    let upload = hw.transfer_time(n * n + n * k);
    let download = hw.transfer_time(n * k);
    let rounds = n_systems.div_ceil(hw.parallel_solves) as f64;
    Ok(upload + download + rounds * hw.settle_relaxations * tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relaxation_time_examples() {
        let hw = HardwareModel::default();
        assert_eq!(relaxation_time(1.0, &hw).unwrap(), 1e-6);
        assert_eq!(relaxation_time(1e-3, &hw).unwrap(), 1e-3);
        assert_eq!(relaxation_time(0.5, &hw).unwrap(), 2e-6);
        assert!(relaxation_time(0.0, &hw).is_err());
        assert!(relaxation_time(-1.0, &hw).is_err());
    }

    #[test]
    fn relaxation_time_scales_inversely() {
        let hw = HardwareModel::default();
        for &a in &[1e-3, 0.25, 1.0, 7.0] {
            assert_eq!(
                relaxation_time(2.0 * a, &hw).unwrap(),
                relaxation_time(a, &hw).unwrap() / 2.0
            );
        }
    }

    #[test]
    fn rc_product() {
        let hw = HardwareModel::from_rc(1e3, 1e-9);
        assert!((hw.rc_time - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn runtime_smallest_instance() {
        let hw = HardwareModel::default();
        let t = analog_runtime_estimate(1, 1, 1.0, &hw).unwrap();
        let expected = 3.0 * 16.0 / 5e10 + 5.0 * 1e-6;
        assert!((t - expected).abs() < 1e-18);
    }

    #[test]
    fn runtime_matrix_transfer_dominates_at_n_1000() {
        let hw = HardwareModel::default();
        let t = analog_runtime_estimate(1000, 1, 1.0, &hw).unwrap();
        let matrix_transfer: f64 = 16.0 * 1e6 / 5e10;
        assert!((matrix_transfer - 3.2e-4).abs() < 1e-15);
        assert!(matrix_transfer / t > 0.95, "{matrix_transfer} of {t}");
    }

    #[test]
    fn runtime_rejects_bad_dims() {
        let hw = HardwareModel::default();
        assert!(analog_runtime_estimate(1000, 0, 1.0, &hw).is_err());
        assert!(analog_runtime_estimate(0, 1, 1.0, &hw).is_err());
        assert!(analog_runtime_estimate(3, 1, 0.0, &hw).is_err());
    }

    #[test]
    fn runtime_monotone_in_size_and_systems_antitone_in_alpha() {
        let hw = HardwareModel::default();
        let t = |n, k, a| analog_runtime_estimate(n, k, a, &hw).unwrap();
        for n in 1..20 {
            for k in 1..6 {
                for &a in &[1e-3, 0.1, 1.0, 10.0] {
                    assert!(t(n + 1, k, a) >= t(n, k, a));
                    assert!(t(n, k + 1, a) >= t(n, k, a));
                    assert!(t(n, k, 2.0 * a) <= t(n, k, a));
                }
            }
        }
    }

    #[test]
    fn parallel_solves_batch_settling() {
        let hw = HardwareModel {
            parallel_solves: 4,
            ..HardwareModel::default()
        };
        let serial = HardwareModel::default();
        let t4 = analog_runtime_estimate(8, 8, 1.0, &hw).unwrap();
        let t1 = analog_runtime_estimate(8, 8, 1.0, &serial).unwrap();
        assert!((t1 - t4 - 6.0 * 5e-6).abs() < 1e-15);
    }
}
