//! Experiment files and the four command drivers behind the binary. Each
//! command is deterministic given its config and writes CSV (comma separated,
//! header row, LF endings) into an output directory.

mod commands;
mod config;

pub use commands::{
    cmd_estimate, cmd_quantize_bench, cmd_solve_bench, cmd_train, quantize_bench, solve_bench,
    AmdahlRow, EstimateRow, Estimates, ExponentRow, QuantBench, QuantBenchRow, RunSummary,
    SolveBenchRow, Stat, TrainSummary, VariantSummary, PSD_TOLERANCE,
};
pub use config::{
    AmdahlPoint, EstimateConfig, ExperimentConfig, ExponentSweep, QuantizeBenchConfig,
    SolveBenchConfig, SolveBudget,
};
