//! Round an ill-conditioned SPD matrix onto a low-bit grid, plainly and with
//! the diagonal-dominance correction, and compare the smallest eigenvalues.

use thermo_kfac::corpus::wishart;
use thermo_kfac::matrix::symmetric_eigenvalues;
use thermo_kfac::quant::{quantize_conservative_spd, quantize_uniform, QuantSpec};
use thermo_kfac::rng::stream_rng;

fn main() -> thermo_kfac::Result<()> {
    // Ten samples in ten dimensions: full rank, tiny smallest eigenvalue.
    let m = wishart(10, 10, &mut stream_rng(21, 0));
    println!(
        "original      min eigenvalue {:+.3e}",
        symmetric_eigenvalues(&m)?[0]
    );
    for bits in [4, 6, 8, 12] {
        let plain = quantize_uniform(&m, &QuantSpec::uniform(bits))?;
        let safe = quantize_conservative_spd(&m, &QuantSpec::conservative(bits))?;
        let err = |q: &thermo_kfac::matrix::DenseMatrix| {
            q.sub(&m).map(|d| d.frobenius_norm() / m.frobenius_norm())
        };
        println!(
            "{bits:>2} bits: uniform {:+.3e} (error {:.4}), conservative {:+.3e} (error {:.4})",
            symmetric_eigenvalues(&plain)?[0],
            err(&plain)?,
            symmetric_eigenvalues(&safe)?[0],
            err(&safe)?
        );
    }
    Ok(())
}
