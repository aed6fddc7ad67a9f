//! Estimate `M^{-1}` from the stationary covariance of the OU process, and
//! show how the covariance scales with the inverse temperature.

use thermo_kfac::corpus::spd_with_condition;
use thermo_kfac::matrix::cholesky_inverse;
use thermo_kfac::rng::stream_rng;
use thermo_kfac::solver::{thermo_inverse, HardwareModel, SolverConfig};

fn main() -> thermo_kfac::Result<()> {
    let m = spd_with_condition(6, 5.0, &mut stream_rng(7, 0));
    let exact = cholesky_inverse(&m)?;
    let hw = HardwareModel::default();

    let cfg = SolverConfig {
        seed: 3,
        ..SolverConfig::default()
    };
    let est = thermo_inverse(&m, &cfg, &hw)?;
    let err = est.solution.sub(&exact)?.frobenius_norm() / exact.frobenius_norm();
    println!(
        "inverse from {} samples: Frobenius relative error {err:.4}",
        est.samples_used
    );
    println!(
        "spectrum: alpha in [{:.3}, {:.3}]",
        est.spectrum.min_eigenvalue, est.spectrum.max_eigenvalue
    );

    // Colder dynamics fluctuate less: the raw covariance shrinks like 1/beta.
    let trace: f64 = exact.diag().iter().sum();
    for (seed, beta) in [(10, 0.5), (11, 1.0), (12, 4.0)] {
        let cfg = SolverConfig {
            inverse_temperature: beta,
            n_samples: 20_000,
            seed,
            ..SolverConfig::default()
        };
        let raw: f64 = thermo_inverse(&m, &cfg, &hw)?.sample_variance.iter().sum();
        println!(
            "beta {beta:>3}: tr Cov = {raw:.4}, beta * tr Cov / tr M^-1 = {:.3}",
            beta * raw / trace
        );
    }
    Ok(())
}
