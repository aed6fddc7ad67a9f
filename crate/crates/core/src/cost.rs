//! Per-layer operation and memory counts for each optimizer family, with all
//! hidden constants set to one, and Amdahl speedup projections.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerTag {
    SgdAdam,
    Kfac,
    ThermoKfac,
    ThermoKfacEma,
    KfacReduce,
    ThermoKfacReduce,
    ThermoKfacReduceEma,
    KfacExpand,
    ThermoKfacExpand,
    ThermoKfacExpandEma,
}

impl OptimizerTag {
    pub const ALL: [OptimizerTag; 10] = [
        Self::SgdAdam,
        Self::Kfac,
        Self::ThermoKfac,
        Self::ThermoKfacEma,
        Self::KfacReduce,
        Self::ThermoKfacReduce,
        Self::ThermoKfacReduceEma,
        Self::KfacExpand,
        Self::ThermoKfacExpand,
        Self::ThermoKfacExpandEma,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SgdAdam => "sgd-adam",
            Self::Kfac => "kfac",
            Self::ThermoKfac => "thermo-kfac",
            Self::ThermoKfacEma => "thermo-kfac-ema",
            Self::KfacReduce => "kfac-reduce",
            Self::ThermoKfacReduce => "thermo-kfac-reduce",
            Self::ThermoKfacReduceEma => "thermo-kfac-reduce-ema",
            Self::KfacExpand => "kfac-expand",
            Self::ThermoKfacExpand => "thermo-kfac-expand",
            Self::ThermoKfacExpandEma => "thermo-kfac-expand-ema",
        }
    }

    pub fn is_thermo(self) -> bool {
        self.as_str().starts_with("thermo")
    }

    pub fn keeps_factors(self) -> bool {
        !self.is_thermo() || self.as_str().ends_with("-ema")
    }
}

impl fmt::Display for OptimizerTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OptimizerTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown optimizer tag {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityInput {
    /// Neurons per layer.
    pub n: f64,
    /// Batch size.
    pub b: f64,
    /// Weight-sharing dimension.
    #[serde(default = "one")]
    pub r: f64,
    /// Output dimension.
    #[serde(default = "one")]
    pub c: f64,
    /// Condition number bound.
    #[serde(default = "one")]
    pub kappa: f64,
    pub optimizer: OptimizerTag,
}

fn one() -> f64 {
    1.0
}

impl ComplexityInput {
    pub fn new(optimizer: OptimizerTag, n: f64, b: f64) -> Self {
        Self {
            n,
            b,
            r: 1.0,
            c: 1.0,
            kappa: 1.0,
            optimizer,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n", self.n),
            ("b", self.b),
            ("R", self.r),
            ("C", self.c),
            ("kappa", self.kappa),
        ] {
            if !(v >= 1.0) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "{name} must be a finite value >= 1, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// `(runtime_ops, memory_cells)` for one layer of width `n`.
pub fn complexity_estimate(inp: &ComplexityInput) -> Result<(f64, f64)> {
    inp.validate()?;
    let ComplexityInput {
        n,
        b,
        r,
        c,
        kappa,
        optimizer,
    } = *inp;
    let n2 = n * n;
    let solve = if optimizer.is_thermo() {
        n2 * kappa * kappa
    } else {
        n2 * n
    };
    let (factor_ops, activations) = match optimizer {
        OptimizerTag::SgdAdam => return Ok((b * n2, n2)),
        OptimizerTag::Kfac | OptimizerTag::ThermoKfac | OptimizerTag::ThermoKfacEma => {
            (b * n2, b * n)
        }
        OptimizerTag::KfacReduce
        | OptimizerTag::ThermoKfacReduce
        | OptimizerTag::ThermoKfacReduceEma => (b * c * n * (c + n + r), b * n),
        OptimizerTag::KfacExpand
        | OptimizerTag::ThermoKfacExpand
        | OptimizerTag::ThermoKfacExpandEma => (b * r * c * n * (c + n), b * r * n),
    };
    let memory = if optimizer.keeps_factors() {
        activations + n2
    } else {
        activations
    };
    Ok((factor_ops + solve, memory))
}

/// Least-squares slope of `log(runtime_ops)` against `log(n)` with the other
/// fields of `base` held fixed.
pub fn scaling_exponent(base: &ComplexityInput, ns: &[f64]) -> Result<f64> {
    if ns.len() < 4 {
        return Err(Error::invalid(format!(
            "need at least 4 sweep points, got {}",
            ns.len()
        )));
    }
    let lo = ns.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi >= 10.0 * lo) {
        return Err(Error::invalid("sweep must span at least one decade of n"));
    }
    let mut pts = Vec::with_capacity(ns.len());
    for &n in ns {
        let (ops, _) = complexity_estimate(&ComplexityInput { n, ..*base })?;
        pts.push((n.ln(), ops.ln()));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// End-to-end speedup when a fraction `f` of the runtime is accelerated by `s`.
/// `s = f64::INFINITY` gives the limit `1 / (1 - f)`.
pub fn amdahl_speedup(f: f64, s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&f) {
        return Err(Error::invalid(format!(
            "inversion fraction must be in [0, 1], got {f}"
        )));
    }
    if !(s >= 1.0) {
        return Err(Error::invalid(format!(
            "inversion speedup must be >= 1, got {s}"
        )));
    }
    // Written so that s = 1 gives exactly 1 and no s exceeds the limit.
    Ok(1.0 / (1.0 - f * (1.0 - 1.0 / s)))
}
