//! A small multilayer perceptron with hand-written backpropagation, the
//! SGD and Adam baselines, synthetic data and the training loop.

mod data;
mod mlp;
mod optim;
mod train;

pub use data::{generate, Dataset, DatasetSpec, Generator, Split, MAX_SAMPLES};
pub use mlp::{
    argmax_rows, loss_value, mlp_backward, mlp_forward, Activation, BatchTrace, ForwardCache,
    Labels, Layer, Loss, MlpModel,
};
pub use optim::{adam_step, sgd_step, AdamParams, AdamState};
pub use train::{train, MetricsRecord, Optimizer, TrainConfig, TrainOutcome, Trainer};
