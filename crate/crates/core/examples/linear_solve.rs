//! Solve `M x = b` by sampling an Ornstein-Uhlenbeck process and compare with
//! a Cholesky solve.

use thermo_kfac::corpus::{gaussian_vector, spd_with_condition};
use thermo_kfac::matrix::{cholesky_solve_vec, relative_error};
use thermo_kfac::rng::stream_rng;
use thermo_kfac::solver::{thermo_solve, HardwareModel, SolverConfig};

fn main() -> thermo_kfac::Result<()> {
    let mut rng = stream_rng(42, 0);
    let m = spd_with_condition(16, 10.0, &mut rng);
    let b = gaussian_vector(16, &mut rng);
    let exact = cholesky_solve_vec(&m, &b)?;
    let hw = HardwareModel::default();

    for n_samples in [1_000, 10_000, 100_000] {
        let cfg = SolverConfig {
            n_samples,
            seed: 1,
            ..SolverConfig::default()
        };
        let est = thermo_solve(&m, &b, &cfg, &hw)?;
        println!(
            "samples {:>6}: relative error {:.4}, {} Euler steps, dt {:.3e}, analog time {:.2} us",
            n_samples,
            relative_error(est.solution.data(), exact.data()),
            est.steps,
            est.dt,
            est.analog_time * 1e6
        );
    }
    Ok(())
}
