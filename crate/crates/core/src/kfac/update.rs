use serde::{Deserialize, Serialize};

use super::backend::{
    ExactSolver, FactorRole, FactorSolver, QuantizedSolver, SolveContext, ThermoSolver,
};
use super::factors::KroneckerFactorPair;
use crate::error::{Error, Result};
use crate::matrix::{kron, DenseMatrix, KRON_SIZE_LIMIT};
use crate::quant::QuantSpec;
use crate::solver::{HardwareModel, SolverConfig};

/// The matrix `D Theta` of loss derivatives for one layer's expanded weights,
/// `n_out x (n_in + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub d_theta: DenseMatrix,
}

impl LayerGradient {
    pub fn new(d_theta: DenseMatrix) -> Self {
        Self { d_theta }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Invert both damped factors, then multiply.
    #[default]
    Inversion,
    /// Solve against the columns of `D Theta`, then against the rows of the
    /// intermediate result. No inverse is formed.
    LinearSystems,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    #[default]
    Exact,
    Thermodynamic,
    /// Thermodynamic with at least one of `input_quant` / `output_quant`.
    ThermodynamicQuantized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KfacConfig {
    pub learning_rate: f64,
    pub damping: f64,
    pub ema_decay_a: f64,
    pub ema_decay_g: f64,
    pub method: Method,
    pub backend: Backend,
    /// Applied to each factor before it reaches the backend.
    pub input_quant: Option<QuantSpec>,
    /// Applied to every inverse or solution the backend returns.
    pub output_quant: Option<QuantSpec>,
    /// Steps between factor refreshes.
    pub update_interval: usize,
    /// Force `A = G = I`; with zero damping the step is plain gradient descent.
    pub identity_factors: bool,
}

impl Default for KfacConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            damping: 0.001,
            ema_decay_a: 0.9999,
            ema_decay_g: 0.9999,
            method: Method::Inversion,
            backend: Backend::Exact,
            input_quant: None,
            output_quant: None,
            update_interval: 1,
            identity_factors: false,
        }
    }
}

impl KfacConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning rate must be finite"));
        }
        if !(self.damping >= 0.0) || !self.damping.is_finite() {
            return Err(Error::invalid(format!(
                "damping must be nonnegative, got {}",
                self.damping
            )));
        }
        for (name, d) in [
            ("ema_decay_a", self.ema_decay_a),
            ("ema_decay_g", self.ema_decay_g),
        ] {
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::invalid(format!("{name} must be in [0, 1], got {d}")));
            }
        }
        if self.update_interval < 1 {
            return Err(Error::invalid("update_interval must be at least 1"));
        }
        for q in self.input_quant.iter().chain(&self.output_quant) {
            q.validate()?;
        }
        if self.backend == Backend::ThermodynamicQuantized
            && self.input_quant.is_none()
            && self.output_quant.is_none()
        {
            return Err(Error::invalid(
                "thermodynamic-quantized backend needs input_quant or output_quant",
            ));
        }
        Ok(())
    }

    /// Builds the backend this configuration asks for. Quantization wraps any
    /// backend whenever a spec is present.
    pub fn solver(&self, solver: &SolverConfig, hardware: &HardwareModel) -> Box<dyn FactorSolver> {
        let quantized = self.input_quant.is_some() || self.output_quant.is_some();
        let wrap = |inner| QuantizedSolver {
            inner,
            input: self.input_quant,
            output: self.output_quant,
        };
        match (self.backend, quantized) {
            (Backend::Exact, false) => Box::new(ExactSolver),
            (Backend::Exact, true) => Box::new(wrap(ExactSolver)),
            (_, q) => {
                let thermo = ThermoSolver {
                    config: solver.clone(),
                    hardware: hardware.clone(),
                };
                if q {
                    Box::new(QuantizedSolver {
                        inner: thermo,
                        input: self.input_quant,
                        output: self.output_quant,
                    })
                } else {
                    Box::new(thermo)
                }
            }
        }
    }
}

/// Preconditioned direction and the analog time spent producing it.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerUpdate {
    pub direction: DenseMatrix,
    pub analog_time: f64,
}

fn check_shapes(pair: &KroneckerFactorPair, grad: &LayerGradient) -> Result<()> {
    let (r, c) = grad.d_theta.shape();
    if pair.smoothed_g().rows() != r || pair.smoothed_a().rows() != c {
        return Err(Error::invalid(format!(
            "gradient {r}x{c} does not match factors G {}x{0} and A {}x{1}",
            pair.smoothed_g().rows(),
            pair.smoothed_a().rows()
        )));
    }
    Ok(())
}

/// Labels failures that stem from an indefinite damped factor with the layer.
fn name_layer(layer: usize, e: Error) -> Error {
    let singular = |e: &Error| {
        matches!(
            e,
            Error::Definiteness { .. } | Error::NotPositiveDefinite { .. }
        )
    };
    let is_singular = match &e {
        Error::ColumnSolves { first, .. } => singular(first),
        other => singular(other),
    };
    if is_singular {
        Error::SingularFactor {
            layer,
            source: Box::new(e),
        }
    } else {
        e
    }
}

fn ctx(step: usize, layer: usize, factor: FactorRole) -> SolveContext {
    SolveContext {
        step,
        layer,
        factor,
    }
}

/// `U = (G + lambda I)^{-1} D Theta (A + lambda I)^{-1}` from two inverses.
pub fn kfac_update_inversion(
    pair: &KroneckerFactorPair,
    grad: &LayerGradient,
    damping: f64,
    solver: &dyn FactorSolver,
    step: usize,
    layer: usize,
) -> Result<LayerUpdate> {
    check_shapes(pair, grad)?;
    let g_inv = solver
        .inverse(pair.smoothed_g(), damping, ctx(step, layer, FactorRole::G))
        .map_err(|e| name_layer(layer, e))?;
    let a_inv = solver
        .inverse(pair.smoothed_a(), damping, ctx(step, layer, FactorRole::A))
        .map_err(|e| name_layer(layer, e))?;
    let direction = g_inv.value.matmul(&grad.d_theta)?.matmul(&a_inv.value)?;
    Ok(LayerUpdate {
        direction,
        analog_time: g_inv.analog_time + a_inv.analog_time,
    })
}

/// Same update as [`kfac_update_inversion`] through linear solves:
/// `Q = (G + lambda I)^{-1} D Theta` column by column, then
/// `U^T = (A + lambda I)^{-1} Q^T`.
pub fn kfac_update_linsys(
    pair: &KroneckerFactorPair,
    grad: &LayerGradient,
    damping: f64,
    solver: &dyn FactorSolver,
    step: usize,
    layer: usize,
) -> Result<LayerUpdate> {
    check_shapes(pair, grad)?;
    let q = solver
        .solve_columns(
            pair.smoothed_g(),
            damping,
            &grad.d_theta,
            ctx(step, layer, FactorRole::G),
        )
        .map_err(|e| name_layer(layer, e))?;
    let ut = solver
        .solve_columns(
            pair.smoothed_a(),
            damping,
            &q.value.transpose(),
            ctx(step, layer, FactorRole::A),
        )
        .map_err(|e| name_layer(layer, e))?;
    Ok(LayerUpdate {
        direction: ut.value.transpose(),
        analog_time: q.analog_time + ut.analog_time,
    })
}

/// Dispatches on `method`.
pub fn kfac_update(
    pair: &KroneckerFactorPair,
    grad: &LayerGradient,
    method: Method,
    damping: f64,
    solver: &dyn FactorSolver,
    step: usize,
    layer: usize,
) -> Result<LayerUpdate> {
    match method {
        Method::Inversion => kfac_update_inversion(pair, grad, damping, solver, step, layer),
        Method::LinearSystems => kfac_update_linsys(pair, grad, damping, solver, step, layer),
    }
}

/// `theta - alpha * u`.
pub fn apply_update(theta: &DenseMatrix, u: &DenseMatrix, alpha: f64) -> Result<DenseMatrix> {
    if theta.shape() != u.shape() {
        return Err(Error::invalid(format!(
            "update {:?} does not match weights {:?}",
            u.shape(),
            theta.shape()
        )));
    }
    let data = theta
        .data()
        .iter()
        .zip(u.data())
        .map(|(&t, &d)| t - alpha * d)
        .collect();
    DenseMatrix::new(theta.rows(), theta.cols(), data)
}

/// Explicit `(A + lambda I) kron (G + lambda I)` for brute-force checks.
pub fn block_fisher_oracle(pair: &KroneckerFactorPair, damping: f64) -> Result<DenseMatrix> {
    let dim = pair.smoothed_a().rows() * pair.smoothed_g().rows();
    if dim > KRON_SIZE_LIMIT {
        return Err(Error::SizeLimit(format!(
            "block Fisher of dimension {dim} exceeds {KRON_SIZE_LIMIT}"
        )));
    }
    kron(
        &pair.smoothed_a().add_identity(damping),
        &pair.smoothed_g().add_identity(damping),
    )
}
