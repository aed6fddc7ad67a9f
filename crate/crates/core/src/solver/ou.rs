use rand::Rng;
use rand_distr::StandardNormal;

use super::{analog_runtime_estimate, GramOperator, HardwareModel, SolveEstimate, SolverConfig};
use crate::error::{Error, Result};
use crate::matrix::{
    cholesky_factor, spectral_bounds, DenseMatrix, DenseVector, SpdReport, SpectralOptions,
    SymmetricOperator, SYMMETRY_TOL,
};
use crate::rng::{stream_rng, streams};

/// Operators whose smallest eigenvalue falls below this fraction of the
/// largest are treated as singular.
const DEFINITENESS_RATIO: f64 = 1e-9;

const BLOW_UP_NORM: f64 = 1e12;

struct Plan {
    dt: f64,
    burn_in_steps: u64,
    spacing_steps: u64,
    n_samples: usize,
    spectrum: SpdReport,
}

impl Plan {
    fn total_steps(&self) -> u64 {
        self.burn_in_steps + self.spacing_steps * self.n_samples as u64
    }
}

fn plan<O: SymmetricOperator + ?Sized>(op: &O, cfg: &SolverConfig) -> Result<Plan> {
    cfg.validate()?;
    let spectrum = match spectral_bounds(op, SpectralOptions::default()) {
        Ok(r) => r,
        // The estimates only set the step size and burn-in; a slowly
        // converging best guess is good enough for that.
        Err(Error::Convergence { best, .. }) => best,
        Err(e) => return Err(e),
    };
    let (alpha_min, alpha_max) = (spectrum.min_eigenvalue, spectrum.max_eigenvalue);
    if !(alpha_max > 0.0) || !(alpha_min > DEFINITENESS_RATIO * alpha_max) {
        return Err(Error::Definiteness {
            alpha_min,
            alpha_max,
        });
    }
    let dt = cfg.dt.unwrap_or(cfg.dt_fraction / alpha_max);
    let tau = 1.0 / alpha_min;
    let burn_in_steps = (cfg.burn_in * tau / dt).ceil() as u64;
    let spacing_steps = ((cfg.sample_spacing * tau / dt).round() as u64).max(1);
    let plan = Plan {
        dt,
        burn_in_steps,
        spacing_steps,
        n_samples: cfg.n_samples,
        spectrum,
    };
    if plan.total_steps() > cfg.max_steps {
        return Err(Error::invalid(format!(
            "solve needs {} integration steps (kappa ~ {:.3e}), above max_steps = {}",
            plan.total_steps(),
            spectrum.condition_number,
            cfg.max_steps
        )));
    }
    Ok(plan)
}

trait Accumulator {
    /// Whether [`Accumulator::step`] must see every post-burn-in state.
    const EVERY_STEP: bool;

    fn step(&mut self, _x: &[f64]) {}

    fn readout(&mut self, x: &[f64]);
}

/// Running mean and per-coordinate second moment (Welford).
struct Welford {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(n: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; n],
            m2: vec![0.0; n],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let k = self.count as f64;
        for ((m, s), &xi) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = xi - *m;
            *m += delta / k;
            *s += delta * (xi - *m);
        }
    }

    fn variance(&self) -> Vec<f64> {
        let denom = (self.count.max(2) - 1) as f64;
        self.m2.iter().map(|v| v / denom).collect()
    }
}

/// Time-average of the trajectory over the sampling window, built from the
/// average of each inter-readout block, plus readout statistics.
struct MeanAccumulator {
    block: Vec<f64>,
    block_len: usize,
    blocks: Welford,
    readouts: Welford,
}

impl MeanAccumulator {
    fn new(n: usize) -> Self {
        Self {
            block: vec![0.0; n],
            block_len: 0,
            blocks: Welford::new(n),
            readouts: Welford::new(n),
        }
    }
}

impl Accumulator for MeanAccumulator {
    const EVERY_STEP: bool = true;

    fn step(&mut self, x: &[f64]) {
        for (s, &xi) in self.block.iter_mut().zip(x) {
            *s += xi;
        }
        self.block_len += 1;
    }

    fn readout(&mut self, x: &[f64]) {
        let inv = 1.0 / self.block_len as f64;
        self.block.iter_mut().for_each(|s| *s *= inv);
        self.blocks.push(&self.block);
        self.block.iter_mut().for_each(|s| *s = 0.0);
        self.block_len = 0;
        self.readouts.push(x);
    }
}

/// Running mean and full co-moment matrix (Welford).
struct CovarianceAccumulator {
    count: usize,
    mean: Vec<f64>,
    delta: Vec<f64>,
    comoment: Vec<f64>,
}

impl CovarianceAccumulator {
    fn new(n: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; n],
            delta: vec![0.0; n],
            comoment: vec![0.0; n * n],
        }
    }

    /// Unbiased sample covariance, symmetrized.
    fn covariance(&self) -> DenseMatrix {
        let n = self.mean.len();
        let denom = (self.count - 1) as f64;
        DenseMatrix::from_fn(n, n, |i, j| self.comoment[i * n + j] / denom).symmetrize()
    }
}

impl Accumulator for CovarianceAccumulator {
    const EVERY_STEP: bool = false;

    fn readout(&mut self, x: &[f64]) {
        self.count += 1;
        let k = self.count as f64;
        let n = self.mean.len();
        for i in 0..n {
            self.delta[i] = x[i] - self.mean[i];
            self.mean[i] += self.delta[i] / k;
        }
        for i in 0..n {
            let di = self.delta[i];
            let row = &mut self.comoment[i * n..(i + 1) * n];
            for ((c, &xj), &mj) in row.iter_mut().zip(x).zip(&self.mean) {
                *c += di * (xj - mj);
            }
        }
    }
}

/// Euler-Maruyama integration from `x(0) = 0`. After burn-in every
/// `spacing_steps`-th state is a readout.
fn simulate<O: SymmetricOperator + ?Sized, A: Accumulator>(
    op: &O,
    b: Option<&[f64]>,
    plan: &Plan,
    cfg: &SolverConfig,
    acc: &mut A,
) -> Result<()> {
    let n = op.dim();
    let zeros;
    let b = match b {
        Some(b) => b,
        None => {
            zeros = vec![0.0; n];
            &zeros
        }
    };
    let mut rng = stream_rng(cfg.seed, streams::SOLVER_BASE.wrapping_add(cfg.stream));
    let noise = (2.0 * plan.dt / cfg.inverse_temperature).sqrt();
    let dt = plan.dt;
    let mut x = vec![0.0; n];
    let mut drift = vec![0.0; n];
    let mut xi_noise = vec![0.0; n];
    let mut scratch = vec![0.0; op.scratch_len()];
    let total = plan.total_steps();
    let mut until_sample = plan.burn_in_steps + plan.spacing_steps;
    for step in 1..=total {
        op.apply_scratch(&x, &mut drift, &mut scratch);
        for z in xi_noise.iter_mut() {
            *z = rng.sample(StandardNormal);
        }
        for (((xi, &di), &bi), &zi) in x.iter_mut().zip(&drift).zip(b).zip(&xi_noise) {
            *xi += -dt * (di - bi) + noise * zi;
        }
        let sample_now = step == until_sample;
        if sample_now || step % 256 == 0 {
            let norm2: f64 = x.iter().map(|v| v * v).sum();
            if !(norm2 <= BLOW_UP_NORM * BLOW_UP_NORM) {
                return Err(Error::Instability {
                    step,
                    norm: norm2.sqrt(),
                });
            }
        }
        if A::EVERY_STEP && step > plan.burn_in_steps {
            acc.step(&x);
        }
        if sample_now {
            acc.readout(&x);
            until_sample += plan.spacing_steps;
        }
    }
    Ok(())
}

/// Dense `M + damping I` after symmetry and definiteness checks.
fn damped_dense(m: &DenseMatrix, cfg: &SolverConfig) -> Result<DenseMatrix> {
    if !m.is_square() {
        return Err(Error::invalid(format!(
            "expected a square matrix, got {}x{}",
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
    cfg.validate()?;
    let damped = if cfg.damping == 0.0 {
        m.clone()
    } else {
        m.add_identity(cfg.damping)
    };
    if let Err(Error::NotPositiveDefinite { value, .. }) = cholesky_factor(&damped) {
        let alpha_max = spectral_bounds(&damped, SpectralOptions::default())
            .map(|r| r.max_eigenvalue)
            .unwrap_or(f64::NAN);
        return Err(Error::Definiteness {
            alpha_min: value,
            alpha_max,
        });
    }
    Ok(damped)
}

fn check_rhs(n: usize, b: &DenseVector) -> Result<()> {
    if b.dim() != n {
        return Err(Error::invalid(format!(
            "right-hand side of length {} for dimension {n}",
            b.dim()
        )));
    }
    Ok(())
}

/// Solves `(op + damping I) x = b` on any symmetric operator. Both the dense
/// and Gram entry points route through here.
pub fn thermo_solve_operator<O: SymmetricOperator + ?Sized>(
    op: &O,
    b: &DenseVector,
    cfg: &SolverConfig,
    hw: &HardwareModel,
) -> Result<SolveEstimate<DenseVector>> {
    let n = op.dim();
    check_rhs(n, b)?;
    hw.validate()?;
    let plan = plan(op, cfg)?;
    let mut acc = MeanAccumulator::new(n);
    simulate(op, Some(b.data()), &plan, cfg, &mut acc)?;
    let analog_time = analog_runtime_estimate(n, 1, plan.spectrum.min_eigenvalue, hw)?;
    Ok(SolveEstimate {
        sample_variance: acc.readouts.variance(),
        samples_used: acc.readouts.count,
        solution: DenseVector::from(acc.blocks.mean),
        analog_time,
        steps: plan.total_steps(),
        dt: plan.dt,
        spectrum: plan.spectrum,
    })
}

/// Estimates `(M + damping I)^{-1} b` from the time-averaged device state.
pub fn thermo_solve(
    m: &DenseMatrix,
    b: &DenseVector,
    cfg: &SolverConfig,
    hw: &HardwareModel,
) -> Result<SolveEstimate<DenseVector>> {
    let damped = damped_dense(m, cfg)?;
    let inner = SolverConfig {
        damping: 0.0,
        ..cfg.clone()
    };
    thermo_solve_operator(&damped, b, &inner, hw)
}

/// Solves against `scale * Phi Phi^T + (op.damping + cfg.damping) I` without
/// forming the `n x n` matrix.
pub fn thermo_solve_gram(
    op: &GramOperator,
    b: &DenseVector,
    cfg: &SolverConfig,
    hw: &HardwareModel,
) -> Result<SolveEstimate<DenseVector>> {
    let damped = op.with_extra_damping(cfg.damping);
    let inner = SolverConfig {
        damping: 0.0,
        ..cfg.clone()
    };
    let mut est = thermo_solve_operator(&damped, b, &inner, hw)?;
    // Only Phi (n x m) and b cross the digital link, not an n x n matrix.
    let n = damped.dim() as f64;
    let settle = est.analog_time - hw.transfer_time(n * n + 2.0 * n);
    est.analog_time = settle + hw.transfer_time(damped.stored_entries() as f64 + 2.0 * n);
    Ok(est)
}

/// Estimates `(M + damping I)^{-1}` as `beta` times the sample covariance of
/// the device state with `b = 0`.
///
/// The Euler-Maruyama chain has stationary covariance
/// `M^{-1} (I - dt M / 2)^{-1} / beta` rather than the continuous-time
/// `M^{-1} / beta`; the factor `(I - dt M / 2)` is applied to remove that
/// discretization bias, so the estimate targets the physical device.
pub fn thermo_inverse(
    m: &DenseMatrix,
    cfg: &SolverConfig,
    hw: &HardwareModel,
) -> Result<SolveEstimate<DenseMatrix>> {
    if cfg.n_samples < 2 {
        return Err(Error::invalid(
            "covariance estimation needs at least 2 samples",
        ));
    }
    let damped = damped_dense(m, cfg)?;
    hw.validate()?;
    let inner = SolverConfig {
        damping: 0.0,
        ..cfg.clone()
    };
    let n = damped.rows();
    let plan = plan(&damped, &inner)?;
    let mut acc = CovarianceAccumulator::new(n);
    simulate(&damped, None, &plan, &inner, &mut acc)?;
    let cov = acc.covariance();
    let correction = DenseMatrix::identity(n).sub(&damped.scale(0.5 * plan.dt))?;
    let inverse = cov
        .matmul(&correction)?
        .scale(cfg.inverse_temperature)
        .symmetrize();
    let analog_time = analog_runtime_estimate(n, n, plan.spectrum.min_eigenvalue, hw)?;
    Ok(SolveEstimate {
        sample_variance: cov.diag(),
        solution: inverse,
        analog_time,
        samples_used: acc.count,
        steps: plan.total_steps(),
        dt: plan.dt,
        spectrum: plan.spectrum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{cholesky_inverse, cholesky_solve_vec, relative_error};

    fn quick(n_samples: usize, seed: u64) -> SolverConfig {
        SolverConfig {
            n_samples,
            seed,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn identity_solve() {
        let m = DenseMatrix::identity(2);
        let b = DenseVector::from(vec![3.0, -1.0]);
        let est = thermo_solve(&m, &b, &quick(100_000, 1), &HardwareModel::default()).unwrap();
        assert!(relative_error(est.solution.data(), b.data()) < 0.02);
        assert_eq!(est.samples_used, 100_000);
        assert!(est.sample_variance.iter().all(|&v| v >= 0.0));
        assert!(est.analog_time > 0.0);
    }

    #[test]
    fn two_by_two_solve() {
        let m = DenseMatrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let b = DenseVector::from(vec![1.0, 1.0]);
        let exact = cholesky_solve_vec(&m, &b).unwrap();
        let est = thermo_solve(&m, &b, &quick(100_000, 2), &HardwareModel::default()).unwrap();
        assert!(relative_error(est.solution.data(), exact.data()) < 0.02);
    }

    #[test]
    fn damping_is_added_inside() {
        let m = DenseMatrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let b = DenseVector::from(vec![1.0, 1.0]);
        let cfg = SolverConfig {
            damping: 1.0,
            ..quick(50_000, 3)
        };
        let exact = cholesky_solve_vec(&m.add_identity(1.0), &b).unwrap();
        let est = thermo_solve(&m, &b, &cfg, &HardwareModel::default()).unwrap();
        assert!(relative_error(est.solution.data(), exact.data()) < 0.03);
    }

    #[test]
    fn inverse_of_diagonal() {
        let m = DenseMatrix::from_diag(&[1.0, 4.0]);
        let est = thermo_inverse(&m, &quick(100_000, 4), &HardwareModel::default()).unwrap();
        let exact = cholesky_inverse(&m).unwrap();
        assert!(relative_error(est.solution.data(), exact.data()) < 0.05);
        assert_eq!(est.solution.max_asymmetry(), 0.0);
    }

    #[test]
    fn seed_determinism() {
        let m = DenseMatrix::from_rows(&[&[2.0, 0.5], &[0.5, 1.0]]);
        let b = DenseVector::from(vec![1.0, -1.0]);
        let hw = HardwareModel::default();
        let a = thermo_solve(&m, &b, &quick(2_000, 5), &hw).unwrap();
        let c = thermo_solve(&m, &b, &quick(2_000, 5), &hw).unwrap();
        assert_eq!(a, c);
        let d = thermo_solve(&m, &b, &quick(2_000, 6), &hw).unwrap();
        assert_ne!(a.solution, d.solution);
        let e = thermo_solve(&m, &b, &quick(2_000, 5).with_stream(1), &hw).unwrap();
        assert_ne!(a.solution, e.solution);
    }

    #[test]
    fn unstable_step_is_detected() {
        let m = DenseMatrix::identity(3);
        let b = DenseVector::from(vec![1.0; 3]);
        let cfg = SolverConfig {
            dt: Some(3.0),
            ..quick(1_000, 7)
        };
        assert!(matches!(
            thermo_solve(&m, &b, &cfg, &HardwareModel::default()),
            Err(Error::Instability { .. })
        ));
    }

    #[test]
    fn indefinite_input_is_rejected() {
        let m = DenseMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        let b = DenseVector::from(vec![1.0, 1.0]);
        let hw = HardwareModel::default();
        assert!(matches!(
            thermo_solve(&m, &b, &quick(10, 0), &hw),
            Err(Error::Definiteness { .. })
        ));
        let asym = DenseMatrix::from_rows(&[&[1.0, 0.5], &[0.0, 1.0]]);
        assert!(matches!(
            thermo_solve(&asym, &b, &quick(10, 0), &hw),
            Err(Error::NotSymmetric { .. })
        ));
        assert!(thermo_solve(&DenseMatrix::identity(3), &b, &quick(10, 0), &hw).is_err());
    }

    #[test]
    fn rank_deficient_gram_without_damping_is_rejected() {
        let phi = DenseMatrix::from_rows(&[&[1.0], &[1.0]]);
        let op = GramOperator::new(phi, 1.0, 0.0).unwrap();
        let b = DenseVector::from(vec![1.0, 1.0]);
        assert!(matches!(
            thermo_solve_gram(&op, &b, &quick(10, 0), &HardwareModel::default()),
            Err(Error::Definiteness { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let bad = [
            SolverConfig {
                inverse_temperature: 0.0,
                ..SolverConfig::default()
            },
            SolverConfig {
                n_samples: 0,
                ..SolverConfig::default()
            },
            SolverConfig {
                damping: -1.0,
                ..SolverConfig::default()
            },
            SolverConfig {
                dt: Some(0.0),
                ..SolverConfig::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}
