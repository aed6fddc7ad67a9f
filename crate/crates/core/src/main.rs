use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thermo_kfac::harness::{
    cmd_estimate, cmd_quantize_bench, cmd_solve_bench, cmd_train, ExperimentConfig,
};

#[derive(Parser)]
#[command(version, about = "K-FAC with a simulated thermodynamic solver backend")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Root seed; overrides every seed in the file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Training repetitions; overrides `repetitions`.
    #[arg(long, global = true)]
    repeat: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Train every variant and write per-run metrics plus summary.json.
    Train,
    /// Solver error against Cholesky over a size/condition/sample grid.
    SolveBench,
    /// Definiteness violations and error per bit width and quantizer.
    QuantizeBench,
    /// Cost-model operation counts, Amdahl speedups and scaling exponents.
    Estimate,
}

fn run(cli: Cli) -> thermo_kfac::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
        cfg.solve_bench.seed = seed;
        cfg.quantize_bench.seed = seed;
    }
    if let Some(r) = cli.repeat {
        cfg.repetitions = r;
    }
    let out = cli.output.clone().unwrap_or_else(|| cfg.output_dir.clone());
    match cli.command {
        Command::Train => {
            let s = cmd_train(&cfg, &out)?;
            for v in &s.variants {
                match (&v.final_loss, &v.final_accuracy) {
                    (Some(l), Some(a)) => println!(
                        "{}: final loss {:.4} ± {:.4}, accuracy {:.4} ± {:.4} over {} runs",
                        v.name,
                        l.mean,
                        l.std,
                        a.mean,
                        a.std,
                        v.runs.len()
                    ),
                    _ => println!(
                        "{}: initial loss {:.4} (no steps)",
                        v.name, v.initial_loss.mean
                    ),
                }
            }
        }
        Command::SolveBench => {
            let rows = cmd_solve_bench(&cfg, &out)?;
            println!(
                "{} grid points written to {}",
                rows.len(),
                out.join("solve_bench.csv").display()
            );
        }
        Command::QuantizeBench => {
            let b = cmd_quantize_bench(&cfg, &out)?;
            for r in &b.rows {
                println!(
                    "{:>2} bits {:?}: {} / {} violations",
                    r.bits, r.kind, r.psd_violations, r.matrices
                );
            }
        }
        Command::Estimate => {
            let e = cmd_estimate(&cfg, &out)?;
            println!(
                "{} estimates, {} speedups, {} exponents written to {}",
                e.points.len(),
                e.amdahl.len(),
                e.exponents.len(),
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
