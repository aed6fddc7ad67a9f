//! K-FAC training with the curvature solves delegated to a simulated
//! thermodynamic (Ornstein-Uhlenbeck) linear-algebra device.
//!
//! Modules, bottom up:
//!
//! - [`matrix`]: dense f64 matrices, Cholesky, Kronecker products, spectral bounds.
//! - [`solver`]: the OU simulator (`thermo_solve`, `thermo_inverse`, Gram operators) and its timing model.
//! - [`quant`]: uniform and definiteness-preserving fixed-point quantizers.
//! - [`kfac`]: Kronecker factors, moving averages, backends and the preconditioned update.
//! - [`nn`]: MLP with hand-written backprop, SGD/Adam/K-FAC training on synthetic data.
//! - [`cost`]: operation and memory counts per optimizer, Amdahl projections.
//! - [`harness`]: experiment files and the `train`, `solve-bench`, `quantize-bench`, `estimate` commands.
//!
//! Runnable examples (`cargo run --release --example <name>`):
//!
//! - `linear_solve`: one system solved on the device vs Cholesky.
//! - `matrix_inverse`: inverse from the stationary covariance, temperature sweep.
//! - `gram_dynamics`: solving against `Phi Phi^T + lambda I` without forming it.
//! - `conservative_quantization`: uniform vs conservative rounding of an SPD matrix.
//! - `kfac_update`: one layer update with exact and thermodynamic backends.
//! - `train_compare`: SGD, Adam and K-FAC on the same task.
//! - `quantized_training`: full precision vs 8-bit readout K-FAC vs Adam.
//! - `cost_model`: complexity estimates, exponents and speedup limits.

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod corpus;
pub mod cost;
pub mod error;
pub mod harness;
pub mod kfac;
pub mod matrix;
pub mod nn;
pub mod quant;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
