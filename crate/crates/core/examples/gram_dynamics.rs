//! Solve against a Kronecker factor `A = (1/b) Phi Phi^T + lambda I` held as
//! its sample matrix `Phi`, without forming `A`.

use thermo_kfac::corpus::{gaussian_matrix, gaussian_vector};
use thermo_kfac::matrix::{cholesky_solve_vec, relative_error};
use thermo_kfac::rng::stream_rng;
use thermo_kfac::solver::{
    thermo_solve, thermo_solve_gram, GramOperator, HardwareModel, SolverConfig,
};

fn main() -> thermo_kfac::Result<()> {
    let mut rng = stream_rng(5, 0);
    let (n, batch) = (12, 4);
    // Rank-deficient on its own: only `batch` samples for `n` features.
    let phi = gaussian_matrix(n, batch, &mut rng);
    let op = GramOperator::new(phi, 1.0 / batch as f64, 0.1)?;
    let b = gaussian_vector(n, &mut rng);
    let dense = op.materialize();
    let exact = cholesky_solve_vec(&dense, &b)?;

    let hw = HardwareModel::default();
    let cfg = SolverConfig {
        seed: 9,
        ..SolverConfig::default()
    };
    let gram = thermo_solve_gram(&op, &b, &cfg, &hw)?;
    let full = thermo_solve(&dense, &b, &cfg, &hw)?;
    println!(
        "Gram form:  error {:.4}, analog time {:.3} us",
        relative_error(gram.solution.data(), exact.data()),
        gram.analog_time * 1e6
    );
    println!(
        "dense form: error {:.4}, analog time {:.3} us",
        relative_error(full.solution.data(), exact.data()),
        full.analog_time * 1e6
    );
    println!("stored entries: {} vs {}", op.stored_entries(), n * n);
    Ok(())
}
