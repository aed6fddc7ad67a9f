use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, QuantizeBenchConfig, SolveBenchConfig, SolveBudget};
use crate::corpus::{gaussian_vector, spd_corpus, spd_with_condition};
use crate::cost::{amdahl_speedup, complexity_estimate, scaling_exponent, ComplexityInput};
use crate::error::{Error, Result};
use crate::matrix::{cholesky_solve_vec, relative_error, spd_report, symmetric_eigenvalues};
use crate::nn::{train, MetricsRecord, TrainConfig, TrainOutcome};
use crate::quant::{QuantKind, QuantSpec};
use crate::rng::{derive, stream_rng, streams};
use crate::solver::{thermo_solve, SolverConfig};

/// Eigenvalues below this count as a definiteness violation.
pub const PSD_TOLERANCE: f64 = -1e-12;

/// Writes `rows` as comma-separated values with a header and LF endings.
/// The header is taken from `header` so that an empty table still has one.
fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(vec![]);
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    fs::write(path, bytes)?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

const METRICS_HEADER: [&str; 6] = [
    "step",
    "loss",
    "accuracy",
    "digital_time_s",
    "analog_time_s",
    "total_time_s",
];

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub metrics_file: String,
    pub initial_loss: f64,
    pub initial_accuracy: f64,
    pub final_loss: Option<f64>,
    pub final_accuracy: Option<f64>,
    pub total_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantSummary {
    pub name: String,
    pub steps: usize,
    pub runs: Vec<RunSummary>,
    pub initial_loss: Stat,
    /// Absent when no steps were taken.
    pub final_loss: Option<Stat>,
    pub final_accuracy: Option<Stat>,
    pub total_time_s: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub repetitions: usize,
    pub variants: Vec<VariantSummary>,
}

impl TrainSummary {
    pub fn variant(&self, name: &str) -> Option<&VariantSummary> {
        self.variants.iter().find(|v| v.name == name)
    }
}

fn summarize(
    name: &str,
    cfg: &TrainConfig,
    runs: Vec<(u64, String, TrainOutcome)>,
) -> VariantSummary {
    let finals = |f: fn(&MetricsRecord) -> f64| -> Option<Stat> {
        let vals: Option<Vec<f64>> = runs.iter().map(|r| r.2.records.last().map(f)).collect();
        vals.map(|v| Stat::of(&v))
    };
    let summary_runs = runs
        .iter()
        .map(|(seed, file, out)| RunSummary {
            seed: *seed,
            metrics_file: file.clone(),
            initial_loss: out.initial_loss,
            initial_accuracy: out.initial_accuracy,
            final_loss: out.records.last().map(|r| r.loss),
            final_accuracy: out.records.last().map(|r| r.accuracy),
            total_time_s: out.records.last().map(|r| r.total_time_s),
        })
        .collect();
    VariantSummary {
        name: name.to_string(),
        steps: cfg.steps,
        initial_loss: Stat::of(&runs.iter().map(|r| r.2.initial_loss).collect::<Vec<_>>()),
        final_loss: finals(|r| r.loss),
        final_accuracy: finals(|r| r.accuracy),
        total_time_s: finals(|r| r.total_time_s),
        runs: summary_runs,
    }
}

/// Runs every training variant `repetitions` times, writing
/// `train_<variant>_seed<seed>.csv` per run and `summary.json`.
pub fn cmd_train(cfg: &ExperimentConfig, out_dir: &Path) -> Result<TrainSummary> {
    if cfg.repetitions == 0 {
        return Err(Error::invalid("repetitions must be at least 1"));
    }
    let variants = cfg.train_variants()?;
    for (name, v) in &variants {
        v.validate()
            .map_err(|e| Error::invalid(format!("variant {name:?}: {e}")))?;
    }
    fs::create_dir_all(out_dir)?;
    let jobs: Vec<(usize, u64)> = (0..variants.len())
        .flat_map(|v| (0..cfg.repetitions).map(move |r| (v, r as u64)))
        .collect();
    let results: Vec<Result<(usize, u64, String, TrainOutcome)>> = jobs
        .par_iter()
        .map(|&(v, r)| {
            let (name, base) = &variants[v];
            let seed = base.seed.wrapping_add(r);
            let run_cfg = TrainConfig {
                seed,
                ..base.clone()
            };
            let outcome = train(&run_cfg)?;
            let file = format!("train_{name}_seed{seed}.csv");
            write_csv(&out_dir.join(&file), &METRICS_HEADER, &outcome.records)?;
            Ok((v, seed, file, outcome))
        })
        .collect();
    let mut grouped: Vec<Vec<(u64, String, TrainOutcome)>> = vec![Vec::new(); variants.len()];
    for r in results {
        let (v, seed, file, outcome) = r?;
        grouped[v].push((seed, file, outcome));
    }
    let summary = TrainSummary {
        repetitions: cfg.repetitions,
        variants: variants
            .iter()
            .zip(grouped)
            .map(|((name, c), runs)| summarize(name, c, runs))
            .collect(),
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(out_dir.join("summary.json"), json + "\n")?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveBenchRow {
    pub n: usize,
    pub kappa: f64,
    pub budget: SolveBudget,
    /// Readouts or steps, per `budget`.
    pub n_samples: usize,
    pub dt_fraction: f64,
    pub systems: usize,
    pub mean_rel_error: f64,
    pub max_rel_error: f64,
    pub mean_analog_time_s: f64,
}

const SOLVE_HEADER: [&str; 9] = [
    "n",
    "kappa",
    "budget",
    "n_samples",
    "dt_fraction",
    "systems",
    "mean_rel_error",
    "max_rel_error",
    "mean_analog_time_s",
];

/// Solver error against the Cholesky oracle over the configured grid. The
/// same random systems are reused at every sample count and time step.
pub fn solve_bench(cfg: &SolveBenchConfig) -> Result<Vec<SolveBenchRow>> {
    cfg.validate()?;
    let mut points = Vec::new();
    for (ni, &n) in cfg.sizes.iter().enumerate() {
        for (ki, &kappa) in cfg.kappas.iter().enumerate() {
            for &n_samples in &cfg.sample_counts {
                for &dt_fraction in &cfg.dt_fractions {
                    points.push((ni, n, ki, kappa, n_samples, dt_fraction));
                }
            }
        }
    }
    points
        .par_iter()
        .map(|&(ni, n, ki, kappa, n_samples, dt_fraction)| {
            let mut errors = Vec::with_capacity(cfg.systems);
            let mut analog = 0.0;
            for s in 0..cfg.systems {
                let id = derive(derive(ni as u64, ki as u64), s as u64);
                let mut rng = stream_rng(derive(cfg.seed, id), streams::CORPUS);
                let m = spd_with_condition(n, kappa, &mut rng);
                let b = gaussian_vector(n, &mut rng);
                let exact = cholesky_solve_vec(&m, &b)?;
                let mut solver = SolverConfig {
                    n_samples,
                    dt_fraction,
                    dt: None,
                    stream: s as u64,
                    seed: cfg.seed,
                    ..cfg.solver.clone()
                };
                if cfg.budget == SolveBudget::Steps {
                    // One readout per step: spacing of dt expressed in relaxation times.
                    solver.sample_spacing = dt_fraction / spd_report(&m)?.condition_number;
                }
                let est = thermo_solve(&m, &b, &solver, &cfg.hardware)?;
                errors.push(relative_error(est.solution.data(), exact.data()));
                analog += est.analog_time;
            }
            Ok(SolveBenchRow {
                n,
                kappa,
                budget: cfg.budget,
                n_samples,
                dt_fraction,
                systems: cfg.systems,
                mean_rel_error: errors.iter().sum::<f64>() / errors.len() as f64,
                max_rel_error: errors.iter().copied().fold(0.0, f64::max),
                mean_analog_time_s: analog / cfg.systems as f64,
            })
        })
        .collect()
}

pub fn cmd_solve_bench(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<SolveBenchRow>> {
    let rows = solve_bench(&cfg.solve_bench)?;
    fs::create_dir_all(out_dir)?;
    write_csv(&out_dir.join("solve_bench.csv"), &SOLVE_HEADER, &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantBenchRow {
    pub bits: u32,
    pub kind: QuantKind,
    pub matrices: usize,
    pub psd_violations: usize,
    pub min_eigenvalue: f64,
    pub mean_rel_error: f64,
    pub max_rel_error: f64,
}

const QUANT_HEADER: [&str; 7] = [
    "bits",
    "kind",
    "matrices",
    "psd_violations",
    "min_eigenvalue",
    "mean_rel_error",
    "max_rel_error",
];

#[derive(Debug, Clone, PartialEq)]
pub struct QuantBench {
    pub rows: Vec<QuantBenchRow>,
    /// Frobenius relative error per matrix, one vector per row.
    pub errors: Vec<Vec<f64>>,
}

/// Quantizes a seeded PSD corpus at every `(bits, kind)` and counts
/// matrices whose smallest eigenvalue drops below [`PSD_TOLERANCE`].
pub fn quantize_bench(cfg: &QuantizeBenchConfig) -> Result<QuantBench> {
    let corpus = spd_corpus(cfg.matrices, cfg.max_n, cfg.seed);
    let mut grid = Vec::new();
    for &bits in &cfg.bits {
        for &kind in &cfg.kinds {
            grid.push(QuantSpec {
                bits,
                scale: cfg.scale,
                kind,
            });
        }
    }
    let results: Vec<Result<(QuantBenchRow, Vec<f64>)>> = grid
        .par_iter()
        .map(|spec| {
            spec.validate()?;
            let mut errors = Vec::with_capacity(corpus.len());
            let mut violations = 0;
            let mut min_eig = f64::INFINITY;
            for m in &corpus {
                let q = spec.apply(m)?;
                let lo = symmetric_eigenvalues(&q)?[0];
                min_eig = min_eig.min(lo);
                if lo < PSD_TOLERANCE {
                    violations += 1;
                }
                errors.push(q.sub(m)?.frobenius_norm() / m.frobenius_norm().max(f64::MIN_POSITIVE));
            }
            let row = QuantBenchRow {
                bits: spec.bits,
                kind: spec.kind,
                matrices: corpus.len(),
                psd_violations: violations,
                min_eigenvalue: if corpus.is_empty() { f64::NAN } else { min_eig },
                mean_rel_error: errors.iter().sum::<f64>() / errors.len().max(1) as f64,
                max_rel_error: errors.iter().copied().fold(0.0, f64::max),
            };
            Ok((row, errors))
        })
        .collect();
    let mut bench = QuantBench {
        rows: Vec::new(),
        errors: Vec::new(),
    };
    for r in results {
        let (row, errors) = r?;
        bench.rows.push(row);
        bench.errors.push(errors);
    }
    Ok(bench)
}

pub fn cmd_quantize_bench(cfg: &ExperimentConfig, out_dir: &Path) -> Result<QuantBench> {
    let bench = quantize_bench(&cfg.quantize_bench)?;
    fs::create_dir_all(out_dir)?;
    write_csv(
        &out_dir.join("quantize_bench.csv"),
        &QUANT_HEADER,
        &bench.rows,
    )?;
    Ok(bench)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRow {
    pub optimizer: String,
    pub n: f64,
    pub b: f64,
    pub r: f64,
    pub c: f64,
    pub kappa: f64,
    pub runtime_ops: f64,
    pub memory_cells: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmdahlRow {
    pub label: String,
    pub fraction: f64,
    pub speedup: f64,
    pub end_to_end_speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentRow {
    pub optimizer: String,
    pub n_min: f64,
    pub n_max: f64,
    pub points: usize,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Estimates {
    pub points: Vec<EstimateRow>,
    pub amdahl: Vec<AmdahlRow>,
    pub exponents: Vec<ExponentRow>,
}

/// Evaluates the configured cost-model sweeps and writes `estimates.csv`,
/// `amdahl.csv` and `exponents.csv`.
pub fn cmd_estimate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Estimates> {
    let e = &cfg.estimate;
    let mut out = Estimates::default();
    for p in &e.points {
        let (runtime_ops, memory_cells) = complexity_estimate(p)?;
        out.points.push(EstimateRow {
            optimizer: p.optimizer.to_string(),
            n: p.n,
            b: p.b,
            r: p.r,
            c: p.c,
            kappa: p.kappa,
            runtime_ops,
            memory_cells,
        });
    }
    for a in &e.amdahl {
        out.amdahl.push(AmdahlRow {
            label: a.label.clone(),
            fraction: a.fraction,
            speedup: a.speedup,
            end_to_end_speedup: amdahl_speedup(a.fraction, a.speedup)?,
        });
    }
    for s in &e.exponents {
        let base = ComplexityInput {
            n: 1.0,
            b: s.b,
            r: s.r,
            c: s.c,
            kappa: s.kappa,
            optimizer: s.optimizer,
        };
        out.exponents.push(ExponentRow {
            optimizer: s.optimizer.to_string(),
            n_min: s.ns.iter().copied().fold(f64::INFINITY, f64::min),
            n_max: s.ns.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            points: s.ns.len(),
            exponent: scaling_exponent(&base, &s.ns)?,
        });
    }
    fs::create_dir_all(out_dir)?;
    write_csv(
        &out_dir.join("estimates.csv"),
        &[
            "optimizer",
            "n",
            "b",
            "r",
            "c",
            "kappa",
            "runtime_ops",
            "memory_cells",
        ],
        &out.points,
    )?;
    write_csv(
        &out_dir.join("amdahl.csv"),
        &["label", "fraction", "speedup", "end_to_end_speedup"],
        &out.amdahl,
    )?;
    write_csv(
        &out_dir.join("exponents.csv"),
        &["optimizer", "n_min", "n_max", "points", "exponent"],
        &out.exponents,
    )?;
    Ok(out)
}
