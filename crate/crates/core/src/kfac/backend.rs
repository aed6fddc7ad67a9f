//! Linear-algebra backends that turn damped Kronecker factors into inverses
//! or solutions.

use crate::error::{Error, Result};
use crate::matrix::{cholesky_inverse, cholesky_solve, norm, DenseMatrix, DenseVector};
use crate::quant::{quantize_output, QuantSpec};
use crate::rng::derive;
use crate::solver::{thermo_inverse, thermo_solve, HardwareModel, SolverConfig};

/// Which factor of which layer a request belongs to, at which training step.
/// Stochastic backends key their random streams on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveContext {
    pub step: usize,
    pub layer: usize,
    pub factor: FactorRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorRole {
    A,
    G,
}

impl SolveContext {
    fn stream(&self, column: usize) -> u64 {
        let role = match self.factor {
            FactorRole::A => 0,
            FactorRole::G => 1,
        };
        derive(
            derive(derive(self.step as u64, self.layer as u64), role),
            column as u64,
        )
    }
}

/// A backend result plus the modeled analog time it consumed.
#[derive(Debug, Clone, PartialEq)]
pub struct Solved<T> {
    pub value: T,
    pub analog_time: f64,
}

/// Computes `(m + damping I)^{-1}` or `(m + damping I)^{-1} B`.
pub trait FactorSolver: Sync {
    fn inverse(
        &self,
        m: &DenseMatrix,
        damping: f64,
        ctx: SolveContext,
    ) -> Result<Solved<DenseMatrix>>;

    /// Solves against every column of `rhs`. Failed columns are collected
    /// into a single [`Error::ColumnSolves`].
    fn solve_columns(
        &self,
        m: &DenseMatrix,
        damping: f64,
        rhs: &DenseMatrix,
        ctx: SolveContext,
    ) -> Result<Solved<DenseMatrix>>;
}

/// Digital Cholesky backend.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactSolver;

impl FactorSolver for ExactSolver {
    fn inverse(
        &self,
        m: &DenseMatrix,
        damping: f64,
        _ctx: SolveContext,
    ) -> Result<Solved<DenseMatrix>> {
        Ok(Solved {
            value: cholesky_inverse(&m.add_identity(damping))?,
            analog_time: 0.0,
        })
    }

    fn solve_columns(
        &self,
        m: &DenseMatrix,
        damping: f64,
        rhs: &DenseMatrix,
        _ctx: SolveContext,
    ) -> Result<Solved<DenseMatrix>> {
        Ok(Solved {
            value: cholesky_solve(&m.add_identity(damping), rhs)?,
            analog_time: 0.0,
        })
    }
}

/// Simulated OU hardware. Damping is handed to the solver, which adds it to
/// the drift.
#[derive(Debug, Clone)]
pub struct ThermoSolver {
    pub config: SolverConfig,
    pub hardware: HardwareModel,
}

impl ThermoSolver {
    fn config_for(&self, damping: f64, ctx: SolveContext, column: usize) -> SolverConfig {
        SolverConfig {
            damping,
            stream: ctx.stream(column),
            ..self.config.clone()
        }
    }
}

impl FactorSolver for ThermoSolver {
    fn inverse(
        &self,
        m: &DenseMatrix,
        damping: f64,
        ctx: SolveContext,
    ) -> Result<Solved<DenseMatrix>> {
        let est = thermo_inverse(m, &self.config_for(damping, ctx, 0), &self.hardware)?;
        Ok(Solved {
            value: est.solution,
            analog_time: est.analog_time,
        })
    }

    fn solve_columns(
        &self,
        m: &DenseMatrix,
        damping: f64,
        rhs: &DenseMatrix,
        ctx: SolveContext,
    ) -> Result<Solved<DenseMatrix>> {
        let (n, k) = rhs.shape();
        let mut out = DenseMatrix::zeros(n, k);
        let mut failed = Vec::new();
        let mut first = None;
        let mut settle = 0.0;
        for j in 0..k {
            // Columns are normalized to unit RMS entry before they are loaded,
            // so the fixed thermal noise floor is relative to the signal.
            let col = rhs.column(j);
            let scale = norm(&col) / (n as f64).sqrt();
            if scale == 0.0 {
                continue;
            }
            let b = DenseVector::from(col.iter().map(|v| v / scale).collect::<Vec<f64>>());
            match thermo_solve(m, &b, &self.config_for(damping, ctx, j), &self.hardware) {
                Ok(est) => {
                    for (i, v) in est.solution.data().iter().enumerate() {
                        out[(i, j)] = scale * v;
                    }
                    settle += est.analog_time - self.hardware.transfer_time((n * n + 2 * n) as f64);
                }
                Err(e) => {
                    failed.push(j);
                    first.get_or_insert(e);
                }
            }
        }
        if let Some(first) = first {
            return Err(Error::ColumnSolves {
                columns: failed,
                first: Box::new(first),
            });
        }
        // The matrix is programmed once; every column moves its own vectors.
        let transfer = self.hardware.transfer_time((n * n + 2 * n * k) as f64);
        let rounds = k.div_ceil(self.hardware.parallel_solves) as f64 / k as f64;
        Ok(Solved {
            value: out,
            analog_time: transfer + settle * rounds,
        })
    }
}

/// Wraps a backend with input quantization of the factor and output
/// quantization of every readout.
#[derive(Debug, Clone)]
pub struct QuantizedSolver<S> {
    pub inner: S,
    pub input: Option<QuantSpec>,
    pub output: Option<QuantSpec>,
}

impl<S: FactorSolver> QuantizedSolver<S> {
    fn program(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        match &self.input {
            Some(q) => q.apply(m),
            None => Ok(m.clone()),
        }
    }
}

impl<S: FactorSolver> FactorSolver for QuantizedSolver<S> {
    fn inverse(
        &self,
        m: &DenseMatrix,
        damping: f64,
        ctx: SolveContext,
    ) -> Result<Solved<DenseMatrix>> {
        let mut solved = self.inner.inverse(&self.program(m)?, damping, ctx)?;
        if let Some(q) = &self.output {
            solved.value = quantize_output(&solved.value, q)?;
        }
        Ok(solved)
    }

    fn solve_columns(
        &self,
        m: &DenseMatrix,
        damping: f64,
        rhs: &DenseMatrix,
        ctx: SolveContext,
    ) -> Result<Solved<DenseMatrix>> {
        let mut solved = self
            .inner
            .solve_columns(&self.program(m)?, damping, rhs, ctx)?;
        if let Some(q) = &self.output {
            let (n, k) = solved.value.shape();
            for j in 0..k {
                let col = quantize_output(&DenseVector::from(solved.value.column(j)), q)?;
                for i in 0..n {
                    solved.value[(i, j)] = col[i];
                }
            }
        }
        Ok(solved)
    }
}
