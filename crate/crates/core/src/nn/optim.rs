use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// `theta - lr * grad`.
pub fn sgd_step(theta: &DenseMatrix, grad: &DenseMatrix, lr: f64) -> Result<DenseMatrix> {
    if theta.shape() != grad.shape() {
        return Err(Error::invalid(format!(
            "gradient {:?} does not match weights {:?}",
            grad.shape(),
            theta.shape()
        )));
    }
    let data = theta
        .data()
        .iter()
        .zip(grad.data())
        .map(|(&t, &g)| t - lr * g)
        .collect();
    DenseMatrix::new(theta.rows(), theta.cols(), data)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("Adam betas must be in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("Adam epsilon must be positive"));
        }
        Ok(())
    }
}

/// First and second moment estimates for one weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: DenseMatrix,
    pub v: DenseMatrix,
    pub t: u64,
}

impl AdamState {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            m: DenseMatrix::zeros(rows, cols),
            v: DenseMatrix::zeros(rows, cols),
            t: 0,
        }
    }
}

/// One Adam step with bias correction; updates `state` in place and returns
/// the new weights.
pub fn adam_step(
    state: &mut AdamState,
    theta: &DenseMatrix,
    grad: &DenseMatrix,
    lr: f64,
    p: &AdamParams,
) -> Result<DenseMatrix> {
    if theta.shape() != grad.shape() || state.m.shape() != theta.shape() {
        return Err(Error::invalid(format!(
            "Adam shapes differ: weights {:?}, gradient {:?}, state {:?}",
            theta.shape(),
            grad.shape(),
            state.m.shape()
        )));
    }
    state.t += 1;
    let c1 = 1.0 - p.beta1.powi(state.t as i32);
    let c2 = 1.0 - p.beta2.powi(state.t as i32);
    let mut out = theta.clone();
    let iter = out
        .data_mut()
        .iter_mut()
        .zip(grad.data())
        .zip(state.m.data_mut().iter_mut().zip(state.v.data_mut()));
    for ((w, &g), (m, v)) in iter {
        *m = p.beta1 * *m + (1.0 - p.beta1) * g;
        *v = p.beta2 * *v + (1.0 - p.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *w -= lr * m_hat / (v_hat.sqrt() + p.epsilon);
    }
    Ok(out)
}
