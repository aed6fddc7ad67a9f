//! Per-layer operation counts, width-scaling exponents and end-to-end
//! speedup limits.

use thermo_kfac::cost::{
    amdahl_speedup, complexity_estimate, scaling_exponent, ComplexityInput, OptimizerTag,
};
use thermo_kfac::solver::{relaxation_time, HardwareModel};

fn main() -> thermo_kfac::Result<()> {
    println!("{:<16} {:>14} {:>14}", "n = 1000", "ops", "memory");
    for tag in [
        OptimizerTag::SgdAdam,
        OptimizerTag::Kfac,
        OptimizerTag::ThermoKfac,
        OptimizerTag::ThermoKfacEma,
    ] {
        let inp = ComplexityInput {
            kappa: 10.0,
            ..ComplexityInput::new(tag, 1000.0, 512.0)
        };
        let (ops, mem) = complexity_estimate(&inp)?;
        println!("{:<16} {ops:>14.3e} {mem:>14.3e}", tag.as_str());
    }

    let ns = [256.0, 512.0, 1024.0, 2048.0, 4096.0];
    for tag in [OptimizerTag::Kfac, OptimizerTag::ThermoKfac] {
        let base = ComplexityInput {
            kappa: 10.0,
            ..ComplexityInput::new(tag, 1.0, 32.0)
        };
        println!(
            "{} runtime grows like n^{:.2}",
            tag,
            scaling_exponent(&base, &ns)?
        );
    }

    for (name, f) in [
        ("ViT, 4xV100", 0.11),
        ("GNN, 4xV100", 0.27),
        ("ViT, 8xA100", 0.16),
        ("GNN, 8xA100", 0.35),
    ] {
        println!(
            "{name}: {:.3}x with 10x faster inversion, {:.3}x limit",
            amdahl_speedup(f, 10.0)?,
            amdahl_speedup(f, f64::INFINITY)?
        );
    }

    let hw = HardwareModel::default();
    println!(
        "relaxation time at RC = 1 us, alpha_min = 1e-3: {} s",
        relaxation_time(1e-3, &hw)?
    );
    Ok(())
}
