//! One preconditioned layer update: factors from a minibatch, the update
//! through both methods and both backends, and a check against the explicit
//! Kronecker-product system.

use thermo_kfac::corpus::gaussian_matrix;
use thermo_kfac::kfac::{
    block_fisher_oracle, compute_factors_mlp, kfac_update, ExactSolver, LayerGradient, Method,
    ThermoSolver,
};
use thermo_kfac::matrix::{cholesky_solve_vec, relative_error, DenseMatrix};
use thermo_kfac::rng::stream_rng;
use thermo_kfac::solver::{HardwareModel, SolverConfig};

fn main() -> thermo_kfac::Result<()> {
    let mut rng = stream_rng(11, 0);
    let (batch, n_in, n_out) = (32, 5, 4);
    let mut acts = gaussian_matrix(batch, n_in + 1, &mut rng);
    for k in 0..batch {
        acts[(k, n_in)] = 1.0;
    }
    let grads = gaussian_matrix(batch, n_out, &mut rng).scale(0.1);
    let pair = compute_factors_mlp(&acts, &grads)?;
    let d_theta = grads.transpose().matmul(&acts)?.scale(1.0 / batch as f64);
    let grad = LayerGradient::new(d_theta.clone());
    let damping = 0.1;

    let m1 = kfac_update(&pair, &grad, Method::Inversion, damping, &ExactSolver, 0, 0)?.direction;
    let m2 = kfac_update(
        &pair,
        &grad,
        Method::LinearSystems,
        damping,
        &ExactSolver,
        0,
        0,
    )?
    .direction;
    let oracle = cholesky_solve_vec(&block_fisher_oracle(&pair, damping)?, &d_theta.vec())?;
    let oracle = DenseMatrix::from_vec_columns(n_out, n_in + 1, oracle.data())?;
    println!(
        "method 1 vs oracle: {:.2e}",
        relative_error(m1.data(), oracle.data())
    );
    println!(
        "method 2 vs method 1: {:.2e}",
        relative_error(m2.data(), m1.data())
    );

    let thermo = ThermoSolver {
        config: SolverConfig {
            n_samples: 20_000,
            ..SolverConfig::default()
        },
        hardware: HardwareModel::default(),
    };
    let u = kfac_update(&pair, &grad, Method::LinearSystems, damping, &thermo, 0, 0)?;
    println!(
        "thermodynamic method 2: error {:.4}, analog time {:.2} us",
        relative_error(u.direction.data(), oracle.data()),
        u.analog_time * 1e6
    );
    Ok(())
}
