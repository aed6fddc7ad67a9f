use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, SYMMETRY_TOL};

/// Dense `b x R x n` array: batch, weight-sharing position, feature.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    batch: usize,
    sharing: usize,
    features: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn new(batch: usize, sharing: usize, features: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != batch * sharing * features {
            return Err(Error::invalid(format!(
                "tensor {batch}x{sharing}x{features} needs {} values, got {}",
                batch * sharing * features,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("tensor entries must be finite"));
        }
        Ok(Self {
            batch,
            sharing,
            features,
            data,
        })
    }

    /// Lifts a `b x n` matrix to `b x 1 x n`.
    pub fn from_matrix(m: &DenseMatrix) -> Self {
        Self {
            batch: m.rows(),
            sharing: 1,
            features: m.cols(),
            data: m.data().to_vec(),
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.batch, self.sharing, self.features)
    }

    pub fn vector(&self, k: usize, r: usize) -> &[f64] {
        let start = (k * self.sharing + r) * self.features;
        &self.data[start..start + self.features]
    }

    /// Sum over the sharing axis for batch element `k`.
    fn shared_sum(&self, k: usize) -> Vec<f64> {
        let mut s = vec![0.0; self.features];
        for r in 0..self.sharing {
            for (acc, v) in s.iter_mut().zip(self.vector(k, r)) {
                *acc += v;
            }
        }
        s
    }
}

/// How the gradient factor `G` of the weight-sharing variants is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GNormalization {
    /// `1/b`, so a sharing dimension of one reproduces the MLP factors.
    #[default]
    BatchMean,
    /// Plain sum with no batch prefactor.
    Sum,
}

impl GNormalization {
    fn factor(self, batch: usize) -> f64 {
        match self {
            Self::BatchMean => 1.0 / batch as f64,
            Self::Sum => 1.0,
        }
    }
}

/// Per-layer Kronecker factors with optional exponential-moving-average state.
#[derive(Debug, Clone, PartialEq)]
pub struct KroneckerFactorPair {
    /// Input-side factor, `(n_in + 1) x (n_in + 1)`.
    pub a: DenseMatrix,
    /// Output-side factor, `n_out x n_out`.
    pub g: DenseMatrix,
    pub ema_a: Option<DenseMatrix>,
    pub ema_g: Option<DenseMatrix>,
}

impl KroneckerFactorPair {
    pub fn new(a: DenseMatrix, g: DenseMatrix) -> Result<Self> {
        for (name, m) in [("A", &a), ("G", &g)] {
            if !m.is_square() {
                return Err(Error::invalid(format!(
                    "factor {name} must be square, got {}x{}",
                    m.rows(),
                    m.cols()
                )));
            }
            let asym = m.max_asymmetry();
            if asym > SYMMETRY_TOL {
                return Err(Error::NotSymmetric {
                    max_asymmetry: asym,
                });
            }
        }
        Ok(Self {
            a,
            g,
            ema_a: None,
            ema_g: None,
        })
    }

    pub fn identity(a_dim: usize, g_dim: usize) -> Self {
        Self {
            a: DenseMatrix::identity(a_dim),
            g: DenseMatrix::identity(g_dim),
            ema_a: None,
            ema_g: None,
        }
    }

    /// Replaces the current factors with `fresh` and folds them into the
    /// moving averages. The first call seeds the averages with `fresh`.
    pub fn absorb(&mut self, fresh: KroneckerFactorPair, decay_a: f64, decay_g: f64) -> Result<()> {
        if fresh.a.shape() != self.a.shape() || fresh.g.shape() != self.g.shape() {
            return Err(Error::invalid("factor shapes changed between refreshes"));
        }
        self.ema_a = Some(match &self.ema_a {
            Some(prev) => ema_update(prev, &fresh.a, decay_a)?,
            None => fresh.a.clone(),
        });
        self.ema_g = Some(match &self.ema_g {
            Some(prev) => ema_update(prev, &fresh.g, decay_g)?,
            None => fresh.g.clone(),
        });
        self.a = fresh.a;
        self.g = fresh.g;
        Ok(())
    }

    /// The factor used for preconditioning: the average when tracked.
    pub fn smoothed_a(&self) -> &DenseMatrix {
        self.ema_a.as_ref().unwrap_or(&self.a)
    }

    pub fn smoothed_g(&self) -> &DenseMatrix {
        self.ema_g.as_ref().unwrap_or(&self.g)
    }
}

/// `scale * sum_k v_k v_k^T` over the given vectors, exactly symmetric.
fn outer_sum<'a>(dim: usize, vectors: impl Iterator<Item = &'a [f64]>, scale: f64) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(dim, dim);
    for v in vectors {
        for i in 0..dim {
            let vi = v[i];
            if vi == 0.0 {
                continue;
            }
            let row = &mut out.row_mut(i)[i..];
            for (o, &vj) in row.iter_mut().zip(&v[i..]) {
                *o += vi * vj;
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let v = out[(i, j)] * scale;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// `A = (1/b) sum_k a_k a_k^T` and `G = (1/b) sum_k g_k g_k^T` from the
/// per-sample rows of `activations` (with the appended constant column) and
/// `preact_grads`.
pub fn compute_factors_mlp(
    activations: &DenseMatrix,
    preact_grads: &DenseMatrix,
) -> Result<KroneckerFactorPair> {
    let b = activations.rows();
    if b == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    if preact_grads.rows() != b {
        return Err(Error::invalid(format!(
            "activations have {b} rows but gradients have {}",
            preact_grads.rows()
        )));
    }
    let inv_b = 1.0 / b as f64;
    let a = outer_sum(
        activations.cols(),
        (0..b).map(|k| activations.row(k)),
        inv_b,
    );
    let g = outer_sum(
        preact_grads.cols(),
        (0..b).map(|k| preact_grads.row(k)),
        inv_b,
    );
    Ok(KroneckerFactorPair {
        a,
        g,
        ema_a: None,
        ema_g: None,
    })
}

fn check_pair(a: &Tensor3, g: &Tensor3) -> Result<usize> {
    let (b, r, _) = a.shape();
    let (gb, gr, _) = g.shape();
    if b == 0 || r == 0 || gr == 0 {
        return Err(Error::invalid(
            "batch and sharing dimensions must be at least 1",
        ));
    }
    if gb != b {
        return Err(Error::invalid(format!(
            "activation batch {b} does not match gradient batch {gb}"
        )));
    }
    Ok(b)
}

/// Weight-sharing factors where every shared position counts as a sample:
/// `A = (1/(bR)) sum_{k,r} a a^T` and `G` sums `g g^T` over every
/// (batch, position) row of `g`. The position axis of `g` may be a flattened
/// pair of indices, so its length need not equal `R`.
pub fn compute_factors_expand(
    a: &Tensor3,
    g: &Tensor3,
    norm: GNormalization,
) -> Result<KroneckerFactorPair> {
    let b = check_pair(a, g)?;
    let (_, r, n_in) = a.shape();
    let (_, gr, n_out) = g.shape();
    let a_vectors = (0..b).flat_map(|k| (0..r).map(move |j| (k, j)));
    let a_fac = outer_sum(
        n_in,
        a_vectors.map(|(k, j)| a.vector(k, j)),
        1.0 / (b * r) as f64,
    );
    let g_vectors = (0..b).flat_map(|k| (0..gr).map(move |j| (k, j)));
    let g_fac = outer_sum(
        n_out,
        g_vectors.map(|(k, j)| g.vector(k, j)),
        norm.factor(b),
    );
    Ok(KroneckerFactorPair {
        a: a_fac,
        g: g_fac,
        ema_a: None,
        ema_g: None,
    })
}

/// Weight-sharing factors that sum over shared positions first:
/// `A = (1/(bR^2)) sum_k s_k s_k^T` with `s_k = sum_r a_{k,r}`, and `G` built
/// the same way from `sum_r g_{k,r}`.
pub fn compute_factors_reduce(
    a: &Tensor3,
    g: &Tensor3,
    norm: GNormalization,
) -> Result<KroneckerFactorPair> {
    let b = check_pair(a, g)?;
    let (_, r, n_in) = a.shape();
    let (_, _, n_out) = g.shape();
    let a_sums: Vec<Vec<f64>> = (0..b).map(|k| a.shared_sum(k)).collect();
    let g_sums: Vec<Vec<f64>> = (0..b).map(|k| g.shared_sum(k)).collect();
    let a_fac = outer_sum(
        n_in,
        a_sums.iter().map(Vec::as_slice),
        1.0 / (b * r * r) as f64,
    );
    let g_fac = outer_sum(n_out, g_sums.iter().map(Vec::as_slice), norm.factor(b));
    Ok(KroneckerFactorPair {
        a: a_fac,
        g: g_fac,
        ema_a: None,
        ema_g: None,
    })
}

/// `decay * prev + (1 - decay) * current`.
pub fn ema_update(prev: &DenseMatrix, current: &DenseMatrix, decay: f64) -> Result<DenseMatrix> {
    if !(0.0..=1.0).contains(&decay) {
        return Err(Error::invalid(format!(
            "EMA decay must be in [0, 1], got {decay}"
        )));
    }
    if prev.shape() != current.shape() {
        return Err(Error::invalid(format!(
            "EMA shapes differ: {:?} vs {:?}",
            prev.shape(),
            current.shape()
        )));
    }
    let data = prev
        .data()
        .iter()
        .zip(current.data())
        .map(|(&p, &c)| decay * p + (1.0 - decay) * c)
        .collect();
    DenseMatrix::new(prev.rows(), prev.cols(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mlp_hand_example() {
        let acts = DenseMatrix::from_rows(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]]);
        let grads = DenseMatrix::from_rows(&[&[1.0], &[3.0]]);
        let pair = compute_factors_mlp(&acts, &grads).unwrap();
        assert_eq!(
            pair.a,
            DenseMatrix::from_rows(&[&[0.5, 0.0, 0.5], &[0.0, 0.5, 0.5], &[0.5, 0.5, 1.0]])
        );
        assert_eq!(pair.g, DenseMatrix::from_rows(&[&[5.0]]));
    }

    #[test]
    fn mlp_bias_only() {
        let acts = DenseMatrix::from_rows(&[&[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0]]);
        let grads = DenseMatrix::zeros(3, 2);
        let pair = compute_factors_mlp(&acts, &grads).unwrap();
        let mut expected = DenseMatrix::zeros(3, 3);
        expected[(2, 2)] = 1.0;
        assert_eq!(pair.a, expected);
    }

    #[test]
    fn mlp_rejects_empty_batch() {
        assert!(compute_factors_mlp(&DenseMatrix::zeros(0, 2), &DenseMatrix::zeros(0, 1)).is_err());
        assert!(compute_factors_mlp(&DenseMatrix::zeros(2, 2), &DenseMatrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn expand_and_reduce_hand_examples() {
        let a = Tensor3::new(1, 2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let g = Tensor3::new(1, 2, 1, vec![1.0, 2.0]).unwrap();
        let e = compute_factors_expand(&a, &g, GNormalization::BatchMean).unwrap();
        assert_eq!(e.a, DenseMatrix::identity(2).scale(0.5));
        assert_eq!(e.g, DenseMatrix::from_rows(&[&[5.0]]));
        let r = compute_factors_reduce(&a, &g, GNormalization::BatchMean).unwrap();
        assert_eq!(r.a, DenseMatrix::from_rows(&[&[0.25, 0.25], &[0.25, 0.25]]));
        assert_eq!(r.g, DenseMatrix::from_rows(&[&[9.0]]));
    }

    #[test]
    fn sum_normalization_drops_batch_prefactor() {
        let a = Tensor3::new(2, 1, 1, vec![1.0, 1.0]).unwrap();
        let g = Tensor3::new(2, 1, 1, vec![1.0, 3.0]).unwrap();
        let mean = compute_factors_expand(&a, &g, GNormalization::BatchMean).unwrap();
        let sum = compute_factors_expand(&a, &g, GNormalization::Sum).unwrap();
        assert_eq!(mean.g[(0, 0)], 5.0);
        assert_eq!(sum.g[(0, 0)], 10.0);
    }

    #[test]
    fn tensor_shape_checks() {
        assert!(Tensor3::new(2, 2, 2, vec![0.0; 7]).is_err());
        let a = Tensor3::new(2, 1, 1, vec![1.0, 1.0]).unwrap();
        let g = Tensor3::new(3, 1, 1, vec![1.0; 3]).unwrap();
        assert!(compute_factors_expand(&a, &g, GNormalization::BatchMean).is_err());
        assert!(compute_factors_reduce(&a, &g, GNormalization::BatchMean).is_err());
    }

    #[test]
    fn ema_examples() {
        let i = DenseMatrix::identity(2);
        let three = i.scale(3.0);
        assert_eq!(ema_update(&i, &three, 0.0).unwrap(), three);
        assert_eq!(ema_update(&i, &three, 1.0).unwrap(), i);
        assert_eq!(ema_update(&i, &three, 0.5).unwrap(), i.scale(2.0));
        assert!(ema_update(&i, &three, 1.5).is_err());
        assert!(ema_update(&i, &DenseMatrix::identity(3), 0.5).is_err());
    }

    #[test]
    fn absorb_seeds_then_averages() {
        let mut pair = KroneckerFactorPair::identity(2, 1);
        let fresh = |c: f64| {
            KroneckerFactorPair::new(
                DenseMatrix::identity(2).scale(c),
                DenseMatrix::identity(1).scale(c),
            )
            .unwrap()
        };
        pair.absorb(fresh(4.0), 0.5, 0.5).unwrap();
        assert_eq!(pair.smoothed_a(), &DenseMatrix::identity(2).scale(4.0));
        pair.absorb(fresh(2.0), 0.5, 0.25).unwrap();
        assert_eq!(pair.smoothed_a(), &DenseMatrix::identity(2).scale(3.0));
        assert_eq!(pair.smoothed_g()[(0, 0)], 2.5);
        assert_eq!(pair.a, DenseMatrix::identity(2).scale(2.0));
    }
}
