//! Runs the five-seed quantization study in `configs/quant_study.toml`
//! through the harness and prints the per-variant mean validation accuracy.

use std::path::Path;

use thermo_kfac::harness::{cmd_train, ExperimentConfig};

fn main() -> thermo_kfac::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/quant_study.toml");
    let cfg = ExperimentConfig::load(&path)?;
    let out = std::env::temp_dir().join("thermo_kfac_quant_study");
    let summary = cmd_train(&cfg, &out)?;
    for v in &summary.variants {
        let acc = v.final_accuracy.expect("steps > 0");
        println!("{:<8} accuracy {:.4} ± {:.4}", v.name, acc.mean, acc.std);
    }
    println!("metrics written to {}", out.display());
    Ok(())
}
