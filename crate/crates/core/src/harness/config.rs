use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cost::ComplexityInput;
use crate::cost::OptimizerTag;
use crate::error::{Error, Result};
use crate::nn::TrainConfig;
use crate::quant::{QuantKind, ScalePolicy};
use crate::solver::{HardwareModel, SolverConfig};

/// One experiment file. Every section has defaults, so a file only names
/// what it changes; unknown keys anywhere are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    /// Training runs per variant; run `i` uses seed `train.seed + i`.
    pub repetitions: usize,
    pub train: TrainConfig,
    /// Named partial overrides of `train`. When present, each variant is run
    /// instead of the bare `train` section.
    pub variants: BTreeMap<String, toml::Table>,
    pub solve_bench: SolveBenchConfig,
    pub quantize_bench: QuantizeBenchConfig,
    pub estimate: EstimateConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            repetitions: 1,
            train: TrainConfig::default(),
            variants: BTreeMap::new(),
            solve_bench: SolveBenchConfig::default(),
            quantize_bench: QuantizeBenchConfig::default(),
            estimate: EstimateConfig::default(),
        }
    }
}

/// What `sample_counts` in the solve bench counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveBudget {
    /// Readouts spaced `solver.sample_spacing` relaxation times apart.
    #[default]
    Samples,
    /// Euler steps after burn-in, read out at every step. Stiffer systems
    /// get less simulated time from the same budget.
    Steps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveBenchConfig {
    pub seed: u64,
    pub sizes: Vec<usize>,
    pub kappas: Vec<f64>,
    pub budget: SolveBudget,
    pub sample_counts: Vec<usize>,
    pub dt_fractions: Vec<f64>,
    /// Random systems per grid point.
    pub systems: usize,
    pub solver: SolverConfig,
    pub hardware: HardwareModel,
}

impl Default for SolveBenchConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            sizes: vec![8, 16],
            kappas: vec![1.0, 10.0],
            budget: SolveBudget::Samples,
            sample_counts: vec![1_000, 16_000],
            dt_fractions: vec![1.0],
            systems: 5,
            solver: SolverConfig::default(),
            hardware: HardwareModel::default(),
        }
    }
}

impl SolveBenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.contains(&0) || self.sample_counts.contains(&0) {
            return Err(Error::invalid(
                "solve_bench sizes and sample_counts must be positive",
            ));
        }
        if self.kappas.iter().any(|&k| !(k >= 1.0) || !k.is_finite()) {
            return Err(Error::invalid("solve_bench kappas must be finite and >= 1"));
        }
        if self
            .dt_fractions
            .iter()
            .any(|&f| !(f > 0.0) || !f.is_finite())
        {
            return Err(Error::invalid("solve_bench dt_fractions must be positive"));
        }
        if self.systems == 0 {
            return Err(Error::invalid("solve_bench systems must be at least 1"));
        }
        self.solver.validate()?;
        self.hardware.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizeBenchConfig {
    pub seed: u64,
    pub matrices: usize,
    pub max_n: usize,
    pub bits: Vec<u32>,
    pub kinds: Vec<QuantKind>,
    pub scale: ScalePolicy,
}

impl Default for QuantizeBenchConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            matrices: 200,
            max_n: 16,
            bits: vec![6, 8, 12, 16],
            kinds: vec![QuantKind::Uniform, QuantKind::ConservativeSpd],
            scale: ScalePolicy::MaxAbs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmdahlPoint {
    pub label: String,
    pub fraction: f64,
    /// Speedup of the accelerated part; `inf` gives the limit.
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentSweep {
    pub optimizer: OptimizerTag,
    pub ns: Vec<f64>,
    #[serde(default = "unit")]
    pub b: f64,
    #[serde(default = "unit")]
    pub r: f64,
    #[serde(default = "unit")]
    pub c: f64,
    #[serde(default = "unit")]
    pub kappa: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    /// Points fed to `complexity_estimate`.
    pub points: Vec<ComplexityInput>,
    pub amdahl: Vec<AmdahlPoint>,
    pub exponents: Vec<ExponentSweep>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text, path)
    }

    /// `(name, config)` for each training variant, overrides applied.
    pub fn train_variants(&self) -> Result<Vec<(String, TrainConfig)>> {
        if self.variants.is_empty() {
            return Ok(vec![("base".to_string(), self.train.clone())]);
        }
        let base = toml::Table::try_from(&self.train).map_err(|e| Error::Parse(e.to_string()))?;
        self.variants
            .iter()
            .map(|(name, patch)| {
                let mut merged = base.clone();
                merge(&mut merged, patch);
                let cfg = toml::Value::Table(merged)
                    .try_into::<TrainConfig>()
                    .map_err(|e| Error::invalid(format!("variant {name:?}: {e}")))?;
                Ok((name.clone(), cfg))
            })
            .collect()
    }
}

fn merge(base: &mut toml::Table, patch: &toml::Table) {
    for (k, v) in patch {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(p)) => merge(b, p),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}
