//! Seeded synthetic classification sets.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::{stream_rng, streams};

pub const MAX_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    /// Isotropic Gaussian clusters, one per class.
    Blobs,
    /// Two concentric noisy circles.
    Rings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    #[serde(rename = "name")]
    pub generator: Generator,
    /// Total points, validation split included.
    pub samples: usize,
    #[serde(default = "default_validation")]
    pub validation_fraction: f64,
    /// Standard deviation of the Gaussian jitter; 0.5 for blobs and 0.15
    /// for rings when absent.
    #[serde(default)]
    pub noise: Option<f64>,
    /// Blobs only.
    #[serde(default = "default_classes")]
    pub classes: usize,
    /// Blobs only.
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Blobs only: distance of each centre from the origin.
    #[serde(default = "default_separation")]
    pub separation: f64,
}

fn default_validation() -> f64 {
    0.25
}
fn default_classes() -> usize {
    2
}
fn default_dim() -> usize {
    2
}
fn default_separation() -> f64 {
    2.0
}

impl DatasetSpec {
    pub fn blobs(samples: usize) -> Self {
        Self {
            generator: Generator::Blobs,
            samples,
            validation_fraction: default_validation(),
            noise: None,
            classes: default_classes(),
            dim: default_dim(),
            separation: default_separation(),
        }
    }

    pub fn rings(samples: usize) -> Self {
        Self {
            generator: Generator::Rings,
            ..Self::blobs(samples)
        }
    }

    pub fn noise(&self) -> f64 {
        self.noise.unwrap_or(match self.generator {
            Generator::Blobs => 0.5,
            Generator::Rings => 0.15,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(4..=MAX_SAMPLES).contains(&self.samples) {
            return Err(Error::invalid(format!(
                "samples must be in 4..={MAX_SAMPLES}, got {}",
                self.samples
            )));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::invalid("validation_fraction must be in (0, 1)"));
        }
        if !(self.noise() >= 0.0) || !self.noise().is_finite() {
            return Err(Error::invalid("noise must be nonnegative"));
        }
        if self.generator == Generator::Blobs && (self.classes < 2 || self.dim < 1) {
            return Err(Error::invalid(
                "blobs need at least 2 classes and 1 dimension",
            ));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        match self.generator {
            Generator::Blobs => self.dim,
            Generator::Rings => 2,
        }
    }

    pub fn n_classes(&self) -> usize {
        match self.generator {
            Generator::Blobs => self.classes,
            Generator::Rings => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DenseMatrix,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rows `idx` in order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let d = self.x.cols();
        let x = DenseMatrix::from_fn(idx.len(), d, |i, j| self.x[(idx[i], j)]);
        Dataset {
            x,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Train and validation sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub validation: Dataset,
}

/// Draws the data set, shuffles it and splits off the validation share.
pub fn generate(spec: &DatasetSpec, seed: u64) -> Result<Split> {
    spec.validate()?;
    let mut rng = stream_rng(seed, streams::DATASET);
    let n = spec.samples;
    let d = spec.input_dim();
    let noise = spec.noise();
    let mut x = DenseMatrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    match spec.generator {
        Generator::Blobs => {
            // Centres spaced on a circle (first two coordinates) of radius `separation`.
            let k = spec.classes;
            for i in 0..n {
                let c = i % k;
                let angle = std::f64::consts::TAU * c as f64 / k as f64;
                for j in 0..d {
                    let centre = match j {
                        0 => spec.separation * angle.cos(),
                        1 => spec.separation * angle.sin(),
                        _ => 0.0,
                    };
                    let z: f64 = rng.sample(StandardNormal);
                    x[(i, j)] = centre + noise * z;
                }
                labels.push(c);
            }
        }
        Generator::Rings => {
            for i in 0..n {
                let c = i % 2;
                let radius = 1.0 + c as f64;
                let angle = rng.random_range(0.0..std::f64::consts::TAU);
                let (zx, zy): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                x[(i, 0)] = radius * angle.cos() + noise * zx;
                x[(i, 1)] = radius * angle.sin() + noise * zy;
                labels.push(c);
            }
        }
    }
    let all = Dataset { x, labels };
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_val = ((n as f64 * spec.validation_fraction).round() as usize).clamp(1, n - 1);
    Ok(Split {
        validation: all.subset(&order[..n_val]),
        train: all.subset(&order[n_val..]),
    })
}
