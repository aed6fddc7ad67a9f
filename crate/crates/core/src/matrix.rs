//! Dense linear algebra: matrix/vector carriers, Cholesky solves, extreme
//! eigenvalue estimation and Kronecker products.
//!
//! Storage is row-major: `data[i * cols + j]` holds `M[i, j]`. The `vec`
//! operator used by the Kronecker identities stacks *columns*, so
//! [`DenseMatrix::vec`] and [`DenseMatrix::from_vec_columns`] convert between
//! the two layouts explicitly.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Absolute tolerance on `max |M - M^T|` for symmetric inputs.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Step cap for the Lanczos eigenvalue estimates.
pub const MAX_LANCZOS_STEPS: usize = 500;

/// Consecutive settled steps before Lanczos stops short of the full dimension.
pub const SETTLE_STEPS: usize = 3;

/// Largest product dimension accepted by [`kron`].
pub const KRON_SIZE_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector {
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major data, rejecting length mismatches and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    /// Builds a matrix from row slices.
    ///
    /// # Panics
    /// Panics if the rows have different lengths.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.data[i * self.cols + j])
            .collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::invalid(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * other^T` without materializing the transpose.
    pub fn matmul_transposed(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.cols {
            return Err(Error::invalid(format!(
                "matmul {}x{} by ({}x{})^T",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self::from_fn(self.rows, other.rows, |i, j| {
            dot(self.row(i), other.row(j))
        }))
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::invalid(format!(
                "matvec {}x{} by vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `out = self * x` into a caller-provided buffer. Lengths are not checked
    /// beyond debug assertions; hot loops use this.
    #[inline]
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        #[cfg(target_arch = "x86_64")]
        {
            if std::arch::is_x86_feature_detected!("avx") {
                // SAFETY: the feature was detected at runtime.
                unsafe { matvec_avx(&self.data, self.cols, x, out) };
                return;
            }
        }
        matvec_rows(&self.data, self.cols, x, out);
    }

    fn zip_with(
        &self,
        other: &DenseMatrix,
        op: &str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<DenseMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::invalid(format!(
                "{op} of {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> DenseMatrix {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// `self + c * I`; `self` must be square.
    pub fn add_identity(&self, c: f64) -> DenseMatrix {
        debug_assert!(self.is_square());
        let mut m = self.clone();
        for i in 0..self.rows {
            m.data[i * self.cols + i] += c;
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |M - M^T|`; infinite for non-square matrices.
    pub fn max_asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.data[i * n + j] - self.data[j * n + i]).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.max_asymmetry() <= tol
    }

    /// `(M + M^T) / 2`.
    pub fn symmetrize(&self) -> DenseMatrix {
        debug_assert!(self.is_square());
        let n = self.rows;
        let mut m = self.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                m.data[i * n + j] = avg;
                m.data[j * n + i] = avg;
            }
        }
        m
    }

    /// Column-stacking `vec(M)`.
    pub fn vec(&self) -> DenseVector {
        let mut out = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.push(self.data[i * self.cols + j]);
            }
        }
        DenseVector { data: out }
    }

    /// Inverse of [`DenseMatrix::vec`].
    pub fn from_vec_columns(rows: usize, cols: usize, v: &[f64]) -> Result<DenseMatrix> {
        if v.len() != rows * cols {
            return Err(Error::invalid(format!(
                "vector of length {} cannot be reshaped to {rows}x{cols}",
                v.len()
            )));
        }
        Ok(Self::from_fn(rows, cols, |i, j| v[j * rows + i]))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Writes the text interchange form: a `rows cols` header followed by one
    /// line per row of whitespace-separated values.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.rows, self.cols);
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|v| format!("{v:e}")).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn read_text_file(path: &std::path::Path) -> Result<DenseMatrix> {
        let text = std::fs::read_to_string(path)?;
        text.parse()
            .map_err(|e: Error| Error::Parse(format!("{}: {e}", path.display())))
    }
}

impl FromStr for DenseMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut tokens = s.split_whitespace();
        let mut header = |what: &str| -> Result<usize> {
            tokens
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {what} in header")))?
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad {what}: {e}")))
        };
        let rows = header("rows")?;
        let cols = header("cols")?;
        let data = tokens
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad value {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if data.len() != rows * cols {
            return Err(Error::Parse(format!(
                "expected {} values for {rows}x{cols}, found {}",
                rows * cols,
                data.len()
            )));
        }
        DenseMatrix::new(rows, cols, data)
    }
}

impl fmt::Display for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v:>10.4}")).collect();
            writeln!(f, "[{}]", row.join(" "))?;
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl DenseVector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite entry at {pos}")));
        }
        Ok(Self { data })
    }

    pub fn zeros(n: usize) -> Self {
        Self { data: vec![0.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl From<Vec<f64>> for DenseVector {
    /// Unchecked conversion; use [`DenseVector::new`] for untrusted data.
    fn from(data: Vec<f64>) -> Self {
        Self { data }
    }
}

impl Index<usize> for DenseVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

/// Dot product with a fixed eight-lane summation order, so every code path
/// (vectorized or not) rounds identically.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx") {
            // SAFETY: the feature was detected at runtime.
            return unsafe { dot_avx(a, b) };
        }
    }
    dot_lanes(a, b)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
unsafe fn dot_avx(a: &[f64], b: &[f64]) -> f64 {
    dot_lanes(a, b)
}

/// `out = sum_j x_j * row_j`, i.e. `M^T x`.
#[inline(always)]
fn row_combination(data: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (row, &xj) in data.chunks_exact(cols.max(1)).zip(x) {
        for (o, &m) in out.iter_mut().zip(row) {
            *o += xj * m;
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
unsafe fn row_combination_avx(data: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    row_combination(data, cols, x, out)
}

#[inline(always)]
fn matvec_rows(data: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(data.chunks_exact(cols.max(1))) {
        *o = dot_lanes(row, x);
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
unsafe fn matvec_avx(data: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    matvec_rows(data, cols, x, out)
}

#[inline(always)]
fn dot_lanes(a: &[f64], b: &[f64]) -> f64 {
    const L: usize = 8;
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; L];
    let (ca, cb) = (a.chunks_exact(L), b.chunks_exact(L));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..L {
            acc[k] += x[k] * y[k];
        }
    }
    for (k, (x, y)) in ra.iter().zip(rb).enumerate() {
        acc[k] += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]))
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `|a - b| / |b|` in the L2 (or Frobenius) sense.
pub fn relative_error(estimate: &[f64], reference: &[f64]) -> f64 {
    let diff: f64 = estimate
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    diff / norm(reference)
}

fn check_square_symmetric(m: &DenseMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::invalid(format!(
            "expected a square matrix, got {}x{}",
            m.rows, m.cols
        )));
    }
    let asym = m.max_asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric {
            max_asymmetry: asym,
        });
    }
    Ok(())
}

/// Lower-triangular Cholesky factor `L` with `M = L L^T`.
pub fn cholesky_factor(m: &DenseMatrix) -> Result<DenseMatrix> {
    check_square_symmetric(m)?;
    let n = m.rows;
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let lj = &l.data[j * n..j * n + j];
        let pivot = m[(j, j)] - dot(lj, lj);
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite {
                pivot: j,
                value: pivot,
            });
        }
        let d = pivot.sqrt();
        l.data[j * n + j] = d;
        for i in (j + 1)..n {
            let s = m[(i, j)] - dot(&l.data[i * n..i * n + j], &l.data[j * n..j * n + j]);
            l.data[i * n + j] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L L^T x = b` in place given the Cholesky factor.
pub fn cholesky_substitute(l: &DenseMatrix, x: &mut [f64]) {
    let n = l.rows;
    for i in 0..n {
        let s = x[i] - dot(&l.data[i * n..i * n + i], &x[..i]);
        x[i] = s / l.data[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l.data[k * n + i] * x[k];
        }
        x[i] = s / l.data[i * n + i];
    }
}

/// Solves `M X = B` for symmetric positive-definite `M`.
pub fn cholesky_solve(m: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if b.rows != m.rows {
        return Err(Error::invalid(format!(
            "right-hand side has {} rows, matrix is {}x{}",
            b.rows, m.rows, m.cols
        )));
    }
    let l = cholesky_factor(m)?;
    let mut x = DenseMatrix::zeros(b.rows, b.cols);
    let mut col = vec![0.0; b.rows];
    for j in 0..b.cols {
        for (i, c) in col.iter_mut().enumerate() {
            *c = b[(i, j)];
        }
        cholesky_substitute(&l, &mut col);
        for (i, c) in col.iter().enumerate() {
            x[(i, j)] = *c;
        }
    }
    Ok(x)
}

pub fn cholesky_solve_vec(m: &DenseMatrix, b: &DenseVector) -> Result<DenseVector> {
    if b.dim() != m.rows {
        return Err(Error::invalid(format!(
            "right-hand side of length {} for {}x{}",
            b.dim(),
            m.rows,
            m.cols
        )));
    }
    let l = cholesky_factor(m)?;
    let mut x = b.data.clone();
    cholesky_substitute(&l, &mut x);
    Ok(DenseVector { data: x })
}

/// `M^{-1}` for symmetric positive-definite `M`, symmetrized.
pub fn cholesky_inverse(m: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(cholesky_solve(m, &DenseMatrix::identity(m.rows))?.symmetrize())
}

/// Extreme eigenvalues of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdReport {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `max / min`, or infinity when `min <= 0`.
    pub condition_number: f64,
}

impl SpdReport {
    fn from_bounds(min: f64, max: f64) -> Self {
        let min = min.min(max);
        let condition_number = if min > 0.0 { max / min } else { f64::INFINITY };
        Self {
            min_eigenvalue: min,
            max_eigenvalue: max,
            condition_number,
        }
    }
}

/// A symmetric linear map `x -> Mx`; lets the eigenvalue estimates run on
/// operators that are never materialized.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
    /// Rough norm of the operator, used to scale convergence tolerances.
    fn magnitude_hint(&self) -> f64;

    /// Length of the scratch buffer [`SymmetricOperator::apply_scratch`] needs.
    fn scratch_len(&self) -> usize {
        0
    }

    /// Allocation-free variant of `apply` for hot loops.
    fn apply_scratch(&self, x: &[f64], out: &mut [f64], _scratch: &mut [f64]) {
        self.apply(x, out);
    }
}

impl SymmetricOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.rows
    }

    /// Uses symmetry: `M x` is accumulated as a sum of rows scaled by `x_j`,
    /// which vectorizes without a horizontal reduction.
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.rows);
        #[cfg(target_arch = "x86_64")]
        {
            if std::arch::is_x86_feature_detected!("avx") {
                // SAFETY: the feature was detected at runtime.
                unsafe { row_combination_avx(&self.data, self.cols, x, out) };
                return;
            }
        }
        row_combination(&self.data, self.cols, x, out);
    }

    fn magnitude_hint(&self) -> f64 {
        self.frobenius_norm()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SpectralOptions {
    /// Cap on Lanczos steps (and on stored basis vectors).
    pub max_iterations: usize,
    /// Stop once both extreme Ritz values moved by at most `tol * magnitude`
    /// for [`SETTLE_STEPS`] consecutive steps.
    pub tol: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            max_iterations: MAX_LANCZOS_STEPS,
            tol: 1e-12,
        }
    }
}

/// Smallest and largest eigenvalue of the symmetric tridiagonal matrix with
/// diagonal `a` and off-diagonal `b`, by Sturm-count bisection.
fn tridiagonal_extremes(a: &[f64], b: &[f64]) -> (f64, f64) {
    let k = a.len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..k {
        let r = if i > 0 { b[i - 1].abs() } else { 0.0 } + if i + 1 < k { b[i].abs() } else { 0.0 };
        lo = lo.min(a[i] - r);
        hi = hi.max(a[i] + r);
    }
    let pivmin = f64::MIN_POSITIVE.sqrt() * (1.0 + hi.abs().max(lo.abs()));
    // Number of eigenvalues below x.
    let count = |x: f64| {
        let mut d = 1.0;
        let mut c = 0;
        for i in 0..k {
            let off = if i > 0 { b[i - 1] * b[i - 1] / d } else { 0.0 };
            d = a[i] - x - off;
            if d.abs() < pivmin {
                d = -pivmin;
            }
            if d < 0.0 {
                c += 1;
            }
        }
        c
    };
    let bisect = |target: usize| {
        let (mut l, mut h) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (l + h);
            if mid <= l || mid >= h {
                break;
            }
            if count(mid) >= target {
                h = mid;
            } else {
                l = mid;
            }
        }
        0.5 * (l + h)
    };
    (bisect(1), bisect(k))
}

/// Extreme eigenvalues of any symmetric operator.
///
/// Lanczos with full reorthogonalisation from a fixed start vector; the
/// extremes of the tridiagonal projection are exact once the Krylov space
/// is invariant and converge quickly before that.
pub fn spectral_bounds<O: SymmetricOperator + ?Sized>(
    op: &O,
    opts: SpectralOptions,
) -> Result<SpdReport> {
    let n = op.dim();
    if n == 0 {
        return Err(Error::invalid("empty operator"));
    }
    let magnitude = op.magnitude_hint().max(f64::MIN_POSITIVE);
    // Deterministic start with no special alignment to coordinate or all-ones directions.
    let mut q: Vec<f64> = (0..n)
        .map(|i| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_749_895).fract())
        .collect();
    let nq = norm(&q);
    q.iter_mut().for_each(|x| *x /= nq);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut w = vec![0.0; n];
    let mut prev = (f64::NAN, f64::NAN);
    let mut settled = 0;
    let steps = opts.max_iterations.min(n).max(1);
    for step in 1..=steps {
        op.apply(&q, &mut w);
        let a = dot(&q, &w);
        basis.push(std::mem::take(&mut q));
        alpha.push(a);
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
            }
        }
        let (lo, hi) = tridiagonal_extremes(&alpha, &beta);
        let b = norm(&w);
        if step == n || b <= 1e-13 * magnitude {
            return Ok(SpdReport::from_bounds(lo, hi));
        }
        let tol = opts.tol * magnitude;
        settled = if (lo - prev.0).abs() <= tol && (hi - prev.1).abs() <= tol {
            settled + 1
        } else {
            0
        };
        if settled >= SETTLE_STEPS {
            return Ok(SpdReport::from_bounds(lo, hi));
        }
        prev = (lo, hi);
        beta.push(b);
        q = w.iter().map(|x| x / b).collect();
    }
    Err(Error::Convergence {
        iterations: steps,
        best: SpdReport::from_bounds(prev.0, prev.1),
    })
}

/// Extreme eigenvalues and condition number of a symmetric matrix.
pub fn spd_report(m: &DenseMatrix) -> Result<SpdReport> {
    check_square_symmetric(m)?;
    spectral_bounds(m, SpectralOptions::default())
}

/// All eigenvalues of a symmetric matrix in ascending order, by cyclic Jacobi
/// rotations. Cost is a few `n^3` sweeps; meant for checks on small matrices.
pub fn symmetric_eigenvalues(m: &DenseMatrix) -> Result<Vec<f64>> {
    check_square_symmetric(m)?;
    let n = m.rows;
    let mut a = m.symmetrize();
    let total = a.frobenius_norm();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].powi(2))
            .sum();
        if off.sqrt() <= 1e-15 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig = a.diag();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Explicit Kronecker product `A ⊗ B`.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let (rows, cols) = (a.rows * b.rows, a.cols * b.cols);
    if rows.max(cols) > KRON_SIZE_LIMIT {
        return Err(Error::SizeLimit(format!(
            "Kronecker product of {rows}x{cols} exceeds {KRON_SIZE_LIMIT}"
        )));
    }
    Ok(DenseMatrix::from_fn(rows, cols, |i, j| {
        a[(i / b.rows, j / b.cols)] * b[(i % b.rows, j % b.cols)]
    }))
}

/// `(A ⊗ G) x` computed as `vec(G X A^T)` with `x = vec(X)`.
pub fn kron_matvec(a: &DenseMatrix, g: &DenseMatrix, x: &DenseVector) -> Result<DenseVector> {
    if x.dim() != a.cols * g.cols {
        return Err(Error::invalid(format!(
            "vector of length {} for Kronecker product of {}x{} and {}x{}",
            x.dim(),
            a.rows,
            a.cols,
            g.rows,
            g.cols
        )));
    }
    let xm = DenseMatrix::from_vec_columns(g.cols, a.cols, x.data())?;
    Ok(g.matmul(&xm)?.matmul_transposed(a)?.vec())
}
