use proptest::prelude::*;
use thermo_kfac::corpus::{gaussian_matrix, gaussian_vector, spd_with_condition};
use thermo_kfac::matrix::{cholesky_solve_vec, relative_error, DenseMatrix, DenseVector};
use thermo_kfac::rng::stream_rng;
use thermo_kfac::solver::{
    relaxation_time, thermo_inverse, thermo_solve, thermo_solve_gram, thermo_solve_operator,
    GramOperator, HardwareModel, SolverConfig,
};
use thermo_kfac::Error;

fn system(seed: u64, n: usize, kappa: f64) -> (DenseMatrix, DenseVector) {
    let mut rng = stream_rng(seed, 0);
    let m = spd_with_condition(n, kappa, &mut rng);
    let b = gaussian_vector(n, &mut rng);
    (m, b)
}

fn cfg(seed: u64, n_samples: usize) -> SolverConfig {
    SolverConfig {
        seed,
        n_samples,
        ..SolverConfig::default()
    }
}

#[test]
fn same_seed_gives_identical_estimates() {
    let (m, b) = system(1, 8, 5.0);
    let hw = HardwareModel::default();
    let c = cfg(3, 2_000);
    assert_eq!(
        thermo_solve(&m, &b, &c, &hw).unwrap(),
        thermo_solve(&m, &b, &c, &hw).unwrap()
    );
    assert_eq!(
        thermo_inverse(&m, &c, &hw).unwrap(),
        thermo_inverse(&m, &c, &hw).unwrap()
    );
    let other = thermo_solve(&m, &b, &cfg(4, 2_000), &hw).unwrap();
    assert_ne!(other, thermo_solve(&m, &b, &c, &hw).unwrap());
}

fn mean_and_se(xs: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let k = xs.len() as f64;
    let n = xs[0].len();
    let mean: Vec<f64> = (0..n)
        .map(|i| xs.iter().map(|x| x[i]).sum::<f64>() / k)
        .collect();
    let se = (0..n)
        .map(|i| {
            let var = xs.iter().map(|x| (x[i] - mean[i]).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        })
        .collect();
    (mean, se)
}

#[test]
fn mean_does_not_depend_on_temperature() {
    let (m, b) = system(2, 8, 4.0);
    let hw = HardwareModel::default();
    let run = |beta: f64| -> Vec<Vec<f64>> {
        (0..10)
            .map(|s| {
                let c = SolverConfig {
                    inverse_temperature: beta,
                    ..cfg(100 + s, 5_000)
                };
                thermo_solve(&m, &b, &c, &hw).unwrap().solution.into_data()
            })
            .collect()
    };
    let (m1, se1) = mean_and_se(&run(1.0));
    let (m4, se4) = mean_and_se(&run(4.0));
    for i in 0..8 {
        let tol = 3.0 * (se1[i].powi(2) + se4[i].powi(2)).sqrt();
        assert!(
            (m1[i] - m4[i]).abs() <= tol,
            "coordinate {i}: {} vs {} (tol {tol})",
            m1[i],
            m4[i]
        );
    }
}

#[test]
fn covariance_scales_inversely_with_temperature() {
    let (m, _) = system(3, 8, 4.0);
    let hw = HardwareModel::default();
    let trace = |beta: f64, seed: u64| {
        let c = SolverConfig {
            inverse_temperature: beta,
            ..cfg(seed, 100_000)
        };
        thermo_inverse(&m, &c, &hw)
            .unwrap()
            .sample_variance
            .iter()
            .sum::<f64>()
    };
    let ratio = trace(1.0, 5) / trace(4.0, 6);
    assert!((ratio / 4.0 - 1.0).abs() < 0.2, "ratio {ratio}");
}

#[test]
fn sixteen_times_the_samples_at_least_halves_the_error() {
    let hw = HardwareModel::default();
    let mean_error = |n_samples: usize| {
        (0..10)
            .map(|s| {
                let (m, b) = system(200 + s, 8, 5.0);
                let exact = cholesky_solve_vec(&m, &b).unwrap();
                let est = thermo_solve(&m, &b, &cfg(300 + s, n_samples), &hw).unwrap();
                relative_error(est.solution.data(), exact.data())
            })
            .sum::<f64>()
            / 10.0
    };
    let ratio = mean_error(16_000) / mean_error(1_000);
    assert!(ratio < 0.5, "ratio {ratio}");
}

#[test]
fn gram_operator_matches_its_materialization() {
    let mut rng = stream_rng(4, 0);
    let phi = gaussian_matrix(12, 5, &mut rng);
    let b = gaussian_vector(12, &mut rng);
    let hw = HardwareModel::default();
    let c = SolverConfig {
        damping: 0.3,
        ..cfg(9, 4_000)
    };
    let op = GramOperator::new(phi, 0.5, 0.2).unwrap();

    // The Gram entry point is the operator path plus different transfer accounting.
    let gram = thermo_solve_gram(&op, &b, &c, &hw).unwrap();
    let damped = GramOperator::new(op.factor().clone(), 0.5, 0.5).unwrap();
    let direct = thermo_solve_operator(
        &damped,
        &b,
        &SolverConfig {
            damping: 0.0,
            ..c.clone()
        },
        &hw,
    )
    .unwrap();
    assert_eq!(gram.solution, direct.solution);
    assert_eq!(gram.sample_variance, direct.sample_variance);

    // The dense path runs the same trajectory with differently rounded matvecs.
    let dense = thermo_solve(&op.materialize(), &b, &c, &hw).unwrap();
    assert_eq!(dense.steps, gram.steps);
    let diff = relative_error(gram.solution.data(), dense.solution.data());
    assert!(diff < 1e-8, "{diff}");
    assert!(gram.analog_time < dense.analog_time);
}

#[test]
fn dense_solve_is_the_operator_path_on_the_damped_matrix() {
    let (m, b) = system(5, 6, 3.0);
    let hw = HardwareModel::default();
    let c = SolverConfig {
        damping: 0.25,
        ..cfg(1, 3_000)
    };
    let dense = thermo_solve(&m, &b, &c, &hw).unwrap();
    let op = thermo_solve_operator(
        &m.add_identity(0.25),
        &b,
        &SolverConfig { damping: 0.0, ..c },
        &hw,
    )
    .unwrap();
    assert_eq!(dense, op);
}

#[test]
fn errors_are_reported() {
    let hw = HardwareModel::default();
    let (m, b) = system(6, 4, 2.0);
    let short = DenseVector::from(vec![1.0; 3]);
    assert!(matches!(
        thermo_solve(&m, &short, &cfg(0, 10), &hw),
        Err(Error::InvalidArgument(_))
    ));
    let asym = DenseMatrix::from_rows(&[&[2.0, 1.0], &[0.0, 2.0]]);
    assert!(matches!(
        thermo_solve(&asym, &DenseVector::from(vec![1.0, 1.0]), &cfg(0, 10), &hw),
        Err(Error::NotSymmetric { .. })
    ));
    let indefinite = DenseMatrix::from_diag(&[1.0, -1.0]);
    assert!(matches!(
        thermo_solve(
            &indefinite,
            &DenseVector::from(vec![1.0, 1.0]),
            &cfg(0, 10),
            &hw
        ),
        Err(Error::Definiteness { .. })
    ));
    assert!(thermo_solve(&m, &b, &cfg(0, 0), &hw).is_err());
    assert!(thermo_inverse(&m, &cfg(0, 1), &hw).is_err());
    let bad_hw = HardwareModel {
        rc_time: 0.0,
        ..HardwareModel::default()
    };
    assert!(thermo_solve(&m, &b, &cfg(0, 10), &bad_hw).is_err());
    let capped = SolverConfig {
        max_steps: 100,
        ..cfg(0, 10_000)
    };
    assert!(thermo_solve(&m, &b, &capped, &hw).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relaxation_time_scales_exactly_by_powers_of_two(alpha in 1e-6f64..1e6, e in -20i32..20) {
        let hw = HardwareModel::default();
        let c = 2f64.powi(e);
        prop_assert_eq!(relaxation_time(c * alpha, &hw).unwrap(), relaxation_time(alpha, &hw).unwrap() / c);
    }

    #[test]
    fn relaxation_time_scales_inversely(alpha in 1e-6f64..1e6, c in 1e-3f64..1e3) {
        let hw = HardwareModel::default();
        let scaled = relaxation_time(c * alpha, &hw).unwrap();
        let expected = relaxation_time(alpha, &hw).unwrap() / c;
        prop_assert!((scaled / expected - 1.0).abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn estimates_are_finite_with_nonnegative_variance(seed in any::<u64>(), n in 1usize..10, kappa in 1.0f64..20.0) {
        let (m, b) = system(seed, n, kappa);
        let est = thermo_solve(&m, &b, &cfg(seed, 200), &HardwareModel::default()).unwrap();
        prop_assert!(est.solution.data().iter().all(|v| v.is_finite()));
        prop_assert!(est.sample_variance.iter().all(|&v| v >= 0.0));
        prop_assert!(est.analog_time >= 0.0);
        prop_assert_eq!(est.samples_used, 200);
    }
}

#[test]
fn inverse_is_symmetric_and_close() {
    let (m, _) = system(7, 6, 4.0);
    let est = thermo_inverse(&m, &cfg(2, 100_000), &HardwareModel::default()).unwrap();
    assert!(est.solution.is_symmetric(0.0));
    let exact = thermo_kfac::matrix::cholesky_inverse(&m).unwrap();
    let err = est.solution.sub(&exact).unwrap().frobenius_norm() / exact.frobenius_norm();
    assert!(err < 0.05, "{err}");
}
