//! Seeded generators for random test and benchmark matrices.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::matrix::{dot, DenseMatrix, DenseVector};
use crate::rng::{derive, stream_rng, streams};

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DenseVector {
    DenseVector::from(
        (0..n)
            .map(|_| rng.sample(StandardNormal))
            .collect::<Vec<f64>>(),
    )
}

/// Haar-ish random orthogonal matrix from modified Gram-Schmidt on a
/// Gaussian matrix. Rows are the orthonormal vectors.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DenseMatrix {
    let mut q = gaussian_matrix(n, n, rng);
    for i in 0..n {
        for k in 0..i {
            let proj = dot(q.row(i), q.row(k));
            let (head, tail) = q.data_mut().split_at_mut(i * n);
            let qk = &head[k * n..(k + 1) * n];
            for (x, y) in tail[..n].iter_mut().zip(qk) {
                *x -= proj * y;
            }
        }
        let nrm = dot(q.row(i), q.row(i)).sqrt();
        q.row_mut(i).iter_mut().for_each(|x| *x /= nrm);
    }
    q
}

/// `Q^T diag(eigs) Q` for a random orthogonal `Q`, exactly symmetric.
pub fn spd_with_spectrum<R: Rng + ?Sized>(eigs: &[f64], rng: &mut R) -> DenseMatrix {
    let n = eigs.len();
    let q = random_orthogonal(n, rng);
    let m = DenseMatrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| q[(k, i)] * eigs[k] * q[(k, j)]).sum()
    });
    m.symmetrize()
}

/// SPD matrix with eigenvalues in `[1, kappa]`, both ends attained.
pub fn spd_with_condition<R: Rng + ?Sized>(n: usize, kappa: f64, rng: &mut R) -> DenseMatrix {
    assert!(kappa >= 1.0 && n >= 1);
    let eigs: Vec<f64> = (0..n)
        .map(|i| match i {
            0 => 1.0,
            1 => kappa,
            _ => 1.0 + (kappa - 1.0) * rng.random::<f64>(),
        })
        .collect();
    spd_with_spectrum(&eigs, rng)
}

/// Sample second-moment matrix `X X^T / k` of `k` Gaussian columns; rank
/// deficient whenever `k < n`, like a Kronecker factor from a small batch.
pub fn wishart<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> DenseMatrix {
    let x = gaussian_matrix(n, k, rng);
    x.matmul_transposed(&x)
        .expect("shapes agree")
        .scale(1.0 / k as f64)
        .symmetrize()
}

/// `count` seeded SPD matrices with sizes in `[2, max_n]`, each a Wishart
/// matrix with between `n` and `2n` samples, so full rank but often badly
/// conditioned.
pub fn spd_corpus(count: usize, max_n: usize, seed: u64) -> Vec<DenseMatrix> {
    (0..count)
        .map(|i| {
            let mut rng = stream_rng(derive(seed, i as u64), streams::CORPUS);
            let n = rng.random_range(2..=max_n.max(2));
            let k = rng.random_range(n..=2 * n);
            wishart(n, k, &mut rng)
        })
        .collect()
}
