//! Fixed-point models of the accelerator's digital-to-analog input path and
//! analog-to-digital readout.
//!
//! A grid has `2^bits` evenly spaced levels from `lo` to `hi` inclusive. Under
//! the max-abs policy `lo = -s` and `hi = s` with `s` the largest magnitude in
//! the input, so with `bits = 2` the levels are `{-s, -s/3, s/3, s}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, DenseVector, SYMMETRY_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScalePolicy {
    /// Symmetric range `[-s, s]` with `s` the largest magnitude of the input.
    MaxAbs,
    FixedRange {
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantKind {
    Uniform,
    /// Keeps positive semi-definite inputs positive semi-definite.
    ConservativeSpd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantSpec {
    pub bits: u32,
    #[serde(default = "default_scale")]
    pub scale: ScalePolicy,
    #[serde(default = "default_kind")]
    pub kind: QuantKind,
}

fn default_scale() -> ScalePolicy {
    ScalePolicy::MaxAbs
}

fn default_kind() -> QuantKind {
    QuantKind::Uniform
}

pub const MAX_BITS: u32 = 52;

impl QuantSpec {
    pub fn uniform(bits: u32) -> Self {
        Self {
            bits,
            scale: ScalePolicy::MaxAbs,
            kind: QuantKind::Uniform,
        }
    }

    pub fn conservative(bits: u32) -> Self {
        Self {
            bits,
            scale: ScalePolicy::MaxAbs,
            kind: QuantKind::ConservativeSpd,
        }
    }

    pub fn with_range(self, lo: f64, hi: f64) -> Self {
        Self {
            scale: ScalePolicy::FixedRange { lo, hi },
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_BITS).contains(&self.bits) {
            return Err(Error::invalid(format!(
                "bits must be in 2..={MAX_BITS}, got {}",
                self.bits
            )));
        }
        if let ScalePolicy::FixedRange { lo, hi } = self.scale {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::invalid(format!(
                    "fixed range needs finite lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    /// Quantizes a matrix headed for the accelerator according to `kind`.
    pub fn apply(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        match self.kind {
            QuantKind::Uniform => quantize_uniform(m, self),
            QuantKind::ConservativeSpd => quantize_conservative_spd(m, self),
        }
    }

    fn grid(&self, values: &[f64]) -> Option<Grid> {
        let (lo, hi) = match self.scale {
            ScalePolicy::MaxAbs => {
                let s = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if s == 0.0 {
                    return None;
                }
                (-s, s)
            }
            ScalePolicy::FixedRange { lo, hi } => (lo, hi),
        };
        let top = (1u64 << self.bits) - 1;
        Some(Grid {
            lo,
            hi,
            step: (hi - lo) / top as f64,
            top,
        })
    }
}

/// Level `k` sits at `lo + k * step`; the top level is pinned to `hi` exactly
/// so the range endpoints survive rounding. Levels past the top continue the
/// lattice, which only the conservative diagonal uses.
#[derive(Debug, Clone, Copy)]
struct Grid {
    lo: f64,
    hi: f64,
    step: f64,
    top: u64,
}

impl Grid {
    fn level(&self, k: i64) -> f64 {
        if k == self.top as i64 {
            self.hi
        } else {
            self.lo + k as f64 * self.step
        }
    }

    fn nearest(&self, v: f64) -> f64 {
        let k = ((v - self.lo) / self.step)
            .round()
            .clamp(0.0, self.top as f64) as i64;
        // Float division can land a hair off; settle on the truly nearest level.
        let mut best = k;
        for cand in [k - 1, k + 1] {
            if (0..=self.top as i64).contains(&cand)
                && (self.level(cand) - v).abs() < (self.level(best) - v).abs()
            {
                best = cand;
            }
        }
        self.level(best)
    }

    /// Smallest lattice value `>= v`, unbounded above.
    fn ceil(&self, v: f64) -> f64 {
        let mut k = ((v - self.lo) / self.step).ceil().max(0.0) as i64;
        while self.level(k) < v {
            k += 1;
        }
        while k > 0 && self.level(k - 1) >= v {
            k -= 1;
        }
        self.level(k)
    }
}

/// Containers whose entries can be quantized elementwise.
pub trait Quantizable: Sized {
    fn values(&self) -> &[f64];
    fn with_values(&self, values: Vec<f64>) -> Self;
}

impl Quantizable for DenseMatrix {
    fn values(&self) -> &[f64] {
        self.data()
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        DenseMatrix::new(self.rows(), self.cols(), values).expect("grid values are finite")
    }
}

impl Quantizable for DenseVector {
    fn values(&self) -> &[f64] {
        self.data()
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        DenseVector::from(values)
    }
}

/// Rounds every entry to the nearest grid level. Values outside a fixed range
/// clip to its endpoints; an all-zero input under max-abs stays zero.
pub fn quantize_uniform<T: Quantizable>(x: &T, q: &QuantSpec) -> Result<T> {
    q.validate()?;
    let values = x.values();
    let out = match q.grid(values) {
        Some(grid) => values.iter().map(|&v| grid.nearest(v)).collect(),
        None => vec![0.0; values.len()],
    };
    Ok(x.with_values(out))
}

/// Readout model: uniform rounding on a max-abs grid computed per call,
/// whatever the scale policy in `q`.
pub fn quantize_output<T: Quantizable>(x: &T, q: &QuantSpec) -> Result<T> {
    quantize_uniform(
        x,
        &QuantSpec {
            scale: ScalePolicy::MaxAbs,
            kind: QuantKind::Uniform,
            ..*q
        },
    )
}

/// Rounds the off-diagonal entries to nearest, then raises each diagonal
/// entry by the absolute rounding error accumulated in its row and rounds it
/// up onto the lattice.
///
/// The perturbation `Q - M` is then symmetric and diagonally dominant with a
/// nonnegative diagonal, so it is positive semi-definite and `Q` inherits the
/// semi-definiteness of `M`. The diagonal may land on lattice points above the
/// range endpoint.
pub fn quantize_conservative_spd(m: &DenseMatrix, q: &QuantSpec) -> Result<DenseMatrix> {
    q.validate()?;
    if !m.is_square() {
        return Err(Error::invalid(format!(
            "expected a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let asym = m.max_asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::invalid(format!(
            "conservative quantization needs a symmetric matrix (asymmetry {asym:e})"
        )));
    }
    let Some(grid) = q.grid(m.data()) else {
        return Ok(m.clone());
    };
    let n = m.rows();
    let mut out = DenseMatrix::zeros(n, n);
    let mut row_error = vec![0.0; n];
    for i in 0..n {
        for j in i + 1..n {
            let r = grid.nearest(m[(i, j)]);
            let e = (r - m[(i, j)]).abs();
            row_error[i] += e;
            row_error[j] += e;
            out[(i, j)] = r;
            out[(j, i)] = r;
        }
    }
    for (i, e) in row_error.iter().enumerate() {
        out[(i, i)] = grid.ceil(m[(i, i)] + e);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quarter_grid() -> QuantSpec {
        // 16 levels, step 0.25, zero included.
        QuantSpec::uniform(4).with_range(-1.75, 2.0)
    }

    #[test]
    fn nearest_level() {
        let v = DenseVector::from(vec![0.3, -0.1, 0.13, 5.0, -9.0]);
        let out = quantize_uniform(&v, &quarter_grid()).unwrap();
        assert_eq!(out.data(), &[0.25, 0.0, 0.25, 2.0, -1.75]);
    }

    #[test]
    fn two_bit_levels() {
        let q = QuantSpec::uniform(2).with_range(-1.0, 1.0);
        let v = DenseVector::from(vec![0.4, -0.6, 0.0, 1.0]);
        let out = quantize_uniform(&v, &q).unwrap();
        let third = 1.0 / 3.0;
        assert!((out.data()[0] - third).abs() < 1e-15);
        assert!((out.data()[1] + third).abs() < 1e-15);
        assert_eq!(out.data()[3], 1.0);
    }

    #[test]
    fn output_examples() {
        let q = QuantSpec::uniform(2);
        let out = quantize_output(&DenseVector::from(vec![1.0, 0.49]), &q).unwrap();
        assert_eq!(out.data()[0], 1.0);
        assert!((out.data()[1] - 1.0 / 3.0).abs() < 1e-15);

        let single = quantize_output(
            &DenseVector::from(vec![0.0, -2.5, 0.0]),
            &QuantSpec::uniform(8),
        )
        .unwrap();
        assert_eq!(single.data()[1], -2.5);

        let zeros = quantize_output(&DenseVector::zeros(3), &q).unwrap();
        assert_eq!(zeros.data(), &[0.0; 3]);
    }

    #[test]
    fn sixteen_bit_perturbation_bound() {
        let v: Vec<f64> = (0..200).map(|i| ((i as f64) * 0.731).sin()).collect();
        let s = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let out = quantize_output(&DenseVector::from(v.clone()), &QuantSpec::uniform(16)).unwrap();
        let bound = s / 65535.0;
        for (a, b) in out.data().iter().zip(&v) {
            assert!((a - b).abs() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn conservative_hand_trace() {
        let m = DenseMatrix::from_rows(&[&[1.0, 0.3], &[0.3, 1.0]]);
        let q = QuantSpec::conservative(4).with_range(-1.75, 2.0);
        let out = quantize_conservative_spd(&m, &q).unwrap();
        assert_eq!(out, DenseMatrix::from_rows(&[&[1.25, 0.25], &[0.25, 1.25]]));
    }

    #[test]
    fn conservative_fixed_point_on_grid() {
        let m = DenseMatrix::from_rows(&[&[1.5, 0.25, -0.5], &[0.25, 1.0, 0.0], &[-0.5, 0.0, 2.0]]);
        let q = QuantSpec::conservative(4).with_range(-1.75, 2.0);
        assert_eq!(quantize_conservative_spd(&m, &q).unwrap(), m);
    }

    #[test]
    fn conservative_diagonal_may_exceed_range() {
        let m = DenseMatrix::from_rows(&[&[2.0, 0.1], &[0.1, 2.0]]);
        let q = QuantSpec::conservative(4).with_range(-1.75, 2.0);
        let out = quantize_conservative_spd(&m, &q).unwrap();
        assert_eq!(out[(0, 0)], 2.25);
        assert_eq!(out[(0, 1)], 0.0);
    }

    #[test]
    fn conservative_rejects_asymmetric() {
        let m = DenseMatrix::from_rows(&[&[1.0, 0.5], &[0.0, 1.0]]);
        assert!(quantize_conservative_spd(&m, &QuantSpec::conservative(8)).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(QuantSpec::uniform(1).validate().is_err());
        assert!(QuantSpec::uniform(53).validate().is_err());
        assert!(QuantSpec::uniform(8)
            .with_range(1.0, 1.0)
            .validate()
            .is_err());
        assert!(QuantSpec::uniform(8).validate().is_ok());
    }

    #[test]
    fn apply_dispatches_on_kind() {
        let m = DenseMatrix::from_rows(&[&[1.0, 0.3], &[0.3, 1.0]]);
        let u = QuantSpec::uniform(4)
            .with_range(-1.75, 2.0)
            .apply(&m)
            .unwrap();
        assert_eq!(u[(0, 0)], 1.0);
        let c = QuantSpec::conservative(4)
            .with_range(-1.75, 2.0)
            .apply(&m)
            .unwrap();
        assert_eq!(c[(0, 0)], 1.25);
    }
}
