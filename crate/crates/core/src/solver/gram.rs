use crate::error::{Error, Result};
use crate::matrix::{dot, DenseMatrix, SymmetricOperator};

/// The operator `scale * Phi Phi^T + damping * I`, applied as two
/// matrix-vector products so the `n x n` matrix is never formed.
///
/// `Phi` is `n x m` with one activation (or gradient) sample per column; in
/// circuit form each entry is a programmable conductance in a resistor array.
#[derive(Debug, Clone, PartialEq)]
pub struct GramOperator {
    factor: DenseMatrix,
    damping: f64,
    scale: f64,
}

impl GramOperator {
    pub fn new(factor: DenseMatrix, scale: f64, damping: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::invalid(format!(
                "Gram scale must be positive, got {scale}"
            )));
        }
        if !(damping >= 0.0) || !damping.is_finite() {
            return Err(Error::invalid(format!(
                "damping must be nonnegative, got {damping}"
            )));
        }
        if factor.rows() == 0 {
            return Err(Error::invalid("Gram factor has no rows"));
        }
        Ok(Self {
            factor,
            damping,
            scale,
        })
    }

    pub fn factor(&self) -> &DenseMatrix {
        &self.factor
    }

    pub fn damping(&self) -> f64 {
        self.damping
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Number of stored entries: what would be uploaded to the resistor array.
    pub fn stored_entries(&self) -> usize {
        self.factor.rows() * self.factor.cols()
    }

    /// Returns a copy with extra damping folded in.
    pub(crate) fn with_extra_damping(&self, extra: f64) -> Self {
        Self {
            damping: self.damping + extra,
            ..self.clone()
        }
    }

    /// Dense `scale * Phi Phi^T + damping * I`, for tests and small oracles.
    pub fn materialize(&self) -> DenseMatrix {
        self.factor
            .matmul_transposed(&self.factor)
            .expect("Phi Phi^T is always defined")
            .scale(self.scale)
            .add_identity(self.damping)
            .symmetrize()
    }
}

impl SymmetricOperator for GramOperator {
    fn dim(&self) -> usize {
        self.factor.rows()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let mut scratch = vec![0.0; self.scratch_len()];
        self.apply_scratch(x, out, &mut scratch);
    }

    fn magnitude_hint(&self) -> f64 {
        let fro = self.factor.frobenius_norm();
        self.scale * fro * fro + self.damping
    }

    fn scratch_len(&self) -> usize {
        self.factor.cols()
    }

    fn apply_scratch(&self, x: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        let (n, m) = self.factor.shape();
        scratch[..m].iter_mut().for_each(|t| *t = 0.0);
        for i in 0..n {
            let xi = x[i];
            for (t, &p) in scratch[..m].iter_mut().zip(self.factor.row(i)) {
                *t += p * xi;
            }
        }
        for (i, o) in out.iter_mut().enumerate() {
            let v = dot(self.factor.row(i), &scratch[..m]);
            *o = if self.damping == 0.0 {
                self.scale * v
            } else {
                self.scale * v + self.damping * x[i]
            };
        }
    }
}
