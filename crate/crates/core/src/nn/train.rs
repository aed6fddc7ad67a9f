use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{generate, DatasetSpec, Split};
use super::mlp::{
    argmax_rows, loss_value, mlp_backward, mlp_forward, Activation, BatchTrace, Labels, Loss,
    MlpModel,
};
use super::optim::{adam_step, sgd_step, AdamParams, AdamState};
use crate::error::{Error, Result};
use crate::kfac::{
    apply_update, compute_factors_mlp, kfac_update_linsys, FactorRole, FactorSolver, KfacConfig,
    KroneckerFactorPair, Method, SolveContext,
};
use crate::matrix::DenseMatrix;
use crate::rng::{stream_rng, streams};
use crate::solver::{HardwareModel, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    Sgd,
    Adam,
    Kfac,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    /// Step size for SGD and Adam; K-FAC reads `kfac.learning_rate`.
    pub learning_rate: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    pub dataset: Option<DatasetSpec>,
    pub loss: Loss,
    /// Hidden layer widths.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub adam: AdamParams,
    pub kfac: KfacConfig,
    pub solver: SolverConfig,
    pub hardware: HardwareModel,
    /// Throughput of the simulated digital processor, floating-point ops per second.
    pub digital_flops: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::Kfac,
            learning_rate: 0.01,
            batch_size: 32,
            steps: 100,
            seed: 0,
            dataset: None,
            loss: Loss::SoftmaxCrossEntropy,
            hidden: vec![16],
            activation: Activation::Tanh,
            adam: AdamParams::default(),
            kfac: KfacConfig::default(),
            solver: SolverConfig::default(),
            hardware: HardwareModel::default(),
            digital_flops: 1e10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let Some(dataset) = &self.dataset else {
            return Err(Error::invalid(
                "a dataset section with a generator name is required",
            ));
        };
        dataset.validate()?;
        if self.batch_size < 1 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning_rate must be finite"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::invalid("hidden widths must be positive"));
        }
        if !(self.digital_flops > 0.0) {
            return Err(Error::invalid("digital_flops must be positive"));
        }
        self.adam.validate()?;
        self.kfac.validate()?;
        self.solver.validate()?;
        self.hardware.validate()
    }

    fn dataset(&self) -> &DatasetSpec {
        self.dataset.as_ref().expect("validated")
    }
}

/// One row of the metrics series. Times are simulated and cumulative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub step: usize,
    /// Loss on the full training split after the step.
    pub loss: f64,
    /// Validation accuracy after the step.
    pub accuracy: f64,
    pub digital_time_s: f64,
    pub analog_time_s: f64,
    pub total_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub initial_loss: f64,
    pub initial_accuracy: f64,
    pub records: Vec<MetricsRecord>,
}

impl TrainOutcome {
    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(self.initial_loss, |r| r.loss)
    }

    pub fn final_accuracy(&self) -> f64 {
        self.records
            .last()
            .map_or(self.initial_accuracy, |r| r.accuracy)
    }
}

/// New weights, refreshed cached inverses `(G, A)` if any, and analog time.
type LayerStep = (DenseMatrix, Option<(DenseMatrix, DenseMatrix)>, f64);

/// Step-by-step training driver.
pub struct Trainer {
    cfg: TrainConfig,
    model: MlpModel,
    data: Split,
    train_labels: Labels,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    adam: Vec<AdamState>,
    factors: Vec<KroneckerFactorPair>,
    /// Cached `(G + lambda I)^{-1}` and `(A + lambda I)^{-1}` per layer.
    inverses: Vec<Option<(DenseMatrix, DenseMatrix)>>,
    solver: Box<dyn FactorSolver>,
    step: usize,
    digital_time: f64,
    analog_time: f64,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let spec = cfg.dataset();
        let data = generate(spec, cfg.seed)?;
        let mut sizes = vec![spec.input_dim()];
        sizes.extend(&cfg.hidden);
        sizes.push(spec.n_classes());
        let model = MlpModel::init(
            &sizes,
            cfg.activation,
            &mut stream_rng(cfg.seed, streams::INIT),
        )?;
        let adam = model
            .layers()
            .iter()
            .map(|l| AdamState::zeros(l.weights.rows(), l.weights.cols()))
            .collect();
        let factors = model
            .layers()
            .iter()
            .map(|l| KroneckerFactorPair::identity(l.weights.cols(), l.weights.rows()))
            .collect();
        let solver = cfg.kfac.solver(&cfg.solver, &cfg.hardware);
        let inverses = vec![None; model.layers().len()];
        Ok(Self {
            train_labels: Labels::Classes(data.train.labels.clone()),
            order: (0..data.train.len()).collect(),
            cursor: usize::MAX,
            rng: stream_rng(cfg.seed, streams::BATCHES),
            cfg,
            model,
            data,
            adam,
            factors,
            inverses,
            solver,
            step: 0,
            digital_time: 0.0,
            analog_time: 0.0,
        })
    }

    pub fn model(&self) -> &MlpModel {
        &self.model
    }

    pub fn data(&self) -> &Split {
        &self.data
    }

    pub fn factors(&self) -> &[KroneckerFactorPair] {
        &self.factors
    }

    /// Steps taken so far.
    pub fn steps_done(&self) -> usize {
        self.step
    }

    /// Full-training-split loss and validation accuracy of the current model.
    pub fn evaluate(&self) -> Result<(f64, f64)> {
        let (logits, _) = mlp_forward(&self.model, &self.data.train.x)?;
        let loss = loss_value(&logits, &self.train_labels, self.cfg.loss)?;
        let (val_logits, _) = mlp_forward(&self.model, &self.data.validation.x)?;
        let hits = argmax_rows(&val_logits)
            .iter()
            .zip(&self.data.validation.labels)
            .filter(|(p, l)| p == l)
            .count();
        Ok((loss, hits as f64 / self.data.validation.len() as f64))
    }

    /// Epoch-wise shuffled minibatch indices.
    fn next_batch(&mut self) -> Vec<usize> {
        let n = self.order.len();
        let b = self.cfg.batch_size.min(n);
        if self.cursor.saturating_add(b) > n {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let idx = self.order[self.cursor..self.cursor + b].to_vec();
        self.cursor += b;
        idx
    }

    /// Forward and backward pass on the next minibatch without updating.
    fn trace_batch(&mut self) -> Result<BatchTrace> {
        let idx = self.next_batch();
        let batch = self.data.train.subset(&idx);
        let (logits, cache) = mlp_forward(&self.model, &batch.x)?;
        mlp_backward(
            &self.model,
            &cache,
            &logits,
            &Labels::Classes(batch.labels),
            self.cfg.loss,
        )
    }

    /// Runs one optimizer step and returns its metrics and minibatch trace.
    pub fn step(&mut self) -> Result<(MetricsRecord, BatchTrace)> {
        let step = self.step;
        let trace = self.trace_batch().map_err(|e| Error::Training {
            step,
            source: Box::new(e),
        })?;
        let b = trace.activations[0].rows() as f64;
        let mut flops = 0.0;
        for l in self.model.layers() {
            flops += 6.0 * b * (l.weights.rows() * l.weights.cols()) as f64;
        }
        let (update_flops, analog) = match self.cfg.optimizer {
            Optimizer::Sgd => self.sgd(&trace),
            Optimizer::Adam => self.adam(&trace),
            Optimizer::Kfac => self.kfac(&trace, step),
        }
        .map_err(|e| Error::Training {
            step,
            source: Box::new(e),
        })?;
        flops += update_flops;
        self.digital_time += flops / self.cfg.digital_flops;
        self.analog_time += analog;
        self.step += 1;
        let (loss, accuracy) = self.evaluate()?;
        let record = MetricsRecord {
            step: self.step,
            loss,
            accuracy,
            digital_time_s: self.digital_time,
            analog_time_s: self.analog_time,
            total_time_s: self.digital_time + self.analog_time,
        };
        Ok((record, trace))
    }

    fn sgd(&mut self, trace: &BatchTrace) -> Result<(f64, f64)> {
        for (i, g) in trace.grads.iter().enumerate() {
            let w = sgd_step(
                self.model.layer_weights(i),
                &g.d_theta,
                self.cfg.learning_rate,
            )?;
            self.model.set_layer_weights(i, w)?;
        }
        Ok((2.0 * self.model.parameter_count() as f64, 0.0))
    }

    fn adam(&mut self, trace: &BatchTrace) -> Result<(f64, f64)> {
        for (i, g) in trace.grads.iter().enumerate() {
            let w = adam_step(
                &mut self.adam[i],
                self.model.layer_weights(i),
                &g.d_theta,
                self.cfg.learning_rate,
                &self.cfg.adam,
            )?;
            self.model.set_layer_weights(i, w)?;
        }
        Ok((10.0 * self.model.parameter_count() as f64, 0.0))
    }

    fn kfac(&mut self, trace: &BatchTrace, step: usize) -> Result<(f64, f64)> {
        let k = self.cfg.kfac.clone();
        let refresh = step.is_multiple_of(k.update_interval);
        let b = trace.activations[0].rows() as f64;
        let exact = k.backend == crate::kfac::Backend::Exact;
        let mut flops = 0.0;
        if refresh && !k.identity_factors {
            for (l, pair) in self.factors.iter_mut().enumerate() {
                let fresh = compute_factors_mlp(&trace.activations[l], &trace.preact_grads[l])?;
                let (a, g) = (fresh.a.rows() as f64, fresh.g.rows() as f64);
                flops += (b + 3.0) * (a * a + g * g);
                pair.absorb(fresh, k.ema_decay_a, k.ema_decay_g)?;
            }
        }
        let solver = self.solver.as_ref();
        let factors = &self.factors;
        let results: Vec<Result<LayerStep>> = (0..factors.len())
            .into_par_iter()
            .map(|l| {
                let pair = &factors[l];
                let grad = &trace.grads[l];
                match k.method {
                    Method::Inversion => {
                        let (g_inv, a_inv, analog) = match (&self.inverses[l], refresh) {
                            (Some((g_inv, a_inv)), false) => (g_inv.clone(), a_inv.clone(), 0.0),
                            _ => {
                                let ctx = |factor| SolveContext {
                                    step,
                                    layer: l,
                                    factor,
                                };
                                let name = |e| crate::error::Error::SingularFactor {
                                    layer: l,
                                    source: Box::new(e),
                                };
                                let g = solver
                                    .inverse(pair.smoothed_g(), k.damping, ctx(FactorRole::G))
                                    .map_err(name)?;
                                let a = solver
                                    .inverse(pair.smoothed_a(), k.damping, ctx(FactorRole::A))
                                    .map_err(name)?;
                                (g.value, a.value, g.analog_time + a.analog_time)
                            }
                        };
                        let u = g_inv.matmul(&grad.d_theta)?.matmul(&a_inv)?;
                        Ok((u, Some((g_inv, a_inv)), analog))
                    }
                    Method::LinearSystems => {
                        let u = kfac_update_linsys(pair, grad, k.damping, solver, step, l)?;
                        Ok((u.direction, None, u.analog_time))
                    }
                }
            })
            .collect();
        let mut analog = 0.0;
        for (l, r) in results.into_iter().enumerate() {
            let (u, inv, t) = r?;
            let (a, g) = (
                self.factors[l].a.rows() as f64,
                self.factors[l].g.rows() as f64,
            );
            flops += 2.0 * g * a * (g + a) + 2.0 * g * a;
            if exact && (refresh || k.method == Method::LinearSystems) {
                flops += match k.method {
                    Method::Inversion => a * a * a + g * g * g,
                    Method::LinearSystems => (a * a * a + g * g * g) / 3.0,
                };
            }
            analog += t;
            if inv.is_some() {
                self.inverses[l] = inv;
            }
            let w = apply_update(self.model.layer_weights(l), &u, k.learning_rate)?;
            self.model.set_layer_weights(l, w)?;
        }
        Ok((flops, analog))
    }

    /// Runs the configured number of steps.
    pub fn run(mut self) -> Result<TrainOutcome> {
        let (initial_loss, initial_accuracy) = self.evaluate()?;
        let mut records = Vec::with_capacity(self.cfg.steps);
        for _ in 0..self.cfg.steps {
            let (record, trace) = self.step()?;
            debug_assert!(trace.outer_product_residual() < 1e-12);
            records.push(record);
        }
        Ok(TrainOutcome {
            initial_loss,
            initial_accuracy,
            records,
        })
    }
}

/// Trains a fresh model from `cfg`.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    Trainer::new(cfg.clone())?.run()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(optimizer: Optimizer) -> TrainConfig {
        TrainConfig {
            optimizer,
            steps: 5,
            dataset: Some(DatasetSpec::blobs(120)),
            kfac: KfacConfig {
                damping: 0.01,
                ema_decay_a: 0.9,
                ema_decay_g: 0.9,
                ..KfacConfig::default()
            },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_steps_records_initial_loss_only() {
        let out = train(&TrainConfig {
            steps: 0,
            ..quick(Optimizer::Sgd)
        })
        .unwrap();
        assert!(out.records.is_empty());
        assert!(out.initial_loss > 0.0);
        assert_eq!(out.final_loss(), out.initial_loss);
    }

    #[test]
    fn zero_learning_rate_keeps_loss() {
        let out = train(&TrainConfig {
            learning_rate: 0.0,
            ..quick(Optimizer::Adam)
        })
        .unwrap();
        for r in &out.records {
            assert_eq!(r.loss, out.initial_loss);
        }
    }

    #[test]
    fn times_are_cumulative() {
        let out = train(&quick(Optimizer::Kfac)).unwrap();
        for w in out.records.windows(2) {
            assert!(w[1].digital_time_s > w[0].digital_time_s);
            assert_eq!(w[1].total_time_s, w[1].digital_time_s + w[1].analog_time_s);
        }
        assert_eq!(out.records[0].analog_time_s, 0.0);
    }

    #[test]
    fn missing_dataset_is_rejected() {
        let cfg = TrainConfig {
            dataset: None,
            ..quick(Optimizer::Sgd)
        };
        assert!(matches!(train(&cfg), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn method_two_matches_method_one_exactly_enough() {
        let m1 = train(&quick(Optimizer::Kfac)).unwrap();
        let cfg = TrainConfig {
            kfac: KfacConfig {
                method: Method::LinearSystems,
                ..quick(Optimizer::Kfac).kfac
            },
            ..quick(Optimizer::Kfac)
        };
        let m2 = train(&cfg).unwrap();
        for (a, b) in m1.records.iter().zip(&m2.records) {
            assert!((a.loss - b.loss).abs() < 1e-8 * a.loss.abs().max(1.0));
        }
    }
}
