use proptest::prelude::*;
use thermo_kfac::cost::{
    amdahl_speedup, complexity_estimate, scaling_exponent, ComplexityInput, OptimizerTag,
};

fn tag() -> impl Strategy<Value = OptimizerTag> {
    (0..OptimizerTag::ALL.len()).prop_map(|i| OptimizerTag::ALL[i])
}

fn input() -> impl Strategy<Value = ComplexityInput> {
    (
        tag(),
        1.0f64..1e4,
        1.0f64..1e3,
        1.0f64..64.0,
        1.0f64..1e3,
        1.0f64..1e3,
    )
        .prop_map(|(optimizer, n, b, r, c, kappa)| ComplexityInput {
            n,
            b,
            r,
            c,
            kappa,
            optimizer,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn estimates_never_shrink_when_a_dimension_grows(inp in input(), field in 0usize..5, grow in 1.0f64..10.0) {
        let mut bigger = inp;
        match field {
            0 => bigger.n *= grow,
            1 => bigger.b *= grow,
            2 => bigger.r *= grow,
            3 => bigger.c *= grow,
            _ => bigger.kappa *= grow,
        }
        let (ops, mem) = complexity_estimate(&inp).unwrap();
        let (ops2, mem2) = complexity_estimate(&bigger).unwrap();
        prop_assert!(ops2 >= ops && mem2 >= mem);
        prop_assert!(ops > 0.0 && mem > 0.0);
    }

    #[test]
    fn thermo_memory_drops_the_factor_term_unless_smoothed(inp in input()) {
        let (_, mem) = complexity_estimate(&inp).unwrap();
        let tag = inp.optimizer;
        let activations = match tag.as_str() {
            "sgd-adam" => 0.0,
            s if s.contains("expand") => inp.b * inp.r * inp.n,
            _ => inp.b * inp.n,
        };
        let factors = if tag.is_thermo() && !tag.as_str().ends_with("-ema") { 0.0 } else { inp.n * inp.n };
        prop_assert_eq!(mem, activations + factors);
    }

    #[test]
    fn amdahl_is_one_without_acceleration(f in 0.0f64..=1.0) {
        prop_assert_eq!(amdahl_speedup(f, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn amdahl_is_bounded_by_its_limit(f in 0.0f64..1.0, s in 1.0f64..1e12) {
        let limit = 1.0 / (1.0 - f);
        let v = amdahl_speedup(f, s).unwrap();
        prop_assert!(v >= 1.0 && v <= limit);
        prop_assert!(amdahl_speedup(f, s * 2.0).unwrap() >= v);
        prop_assert_eq!(amdahl_speedup(f, f64::INFINITY).unwrap(), limit);
    }
}

#[test]
fn table_fractions_give_the_quoted_limits() {
    assert!((amdahl_speedup(0.11, f64::INFINITY).unwrap() - 1.124).abs() < 1e-3);
    assert!((amdahl_speedup(0.27, f64::INFINITY).unwrap() - 1.370).abs() < 1e-3);
    assert!((amdahl_speedup(0.5, 3.0).unwrap() - 1.5).abs() < 1e-15);
}

#[test]
fn exponents_follow_the_dominant_terms() {
    let ns: Vec<f64> = (8..=12).map(|e| 2f64.powi(e)).collect();
    let kfac = scaling_exponent(&ComplexityInput::new(OptimizerTag::Kfac, 1.0, 32.0), &ns).unwrap();
    let thermo = scaling_exponent(
        &ComplexityInput::new(OptimizerTag::ThermoKfac, 1.0, 32.0),
        &ns,
    )
    .unwrap();
    let sgd =
        scaling_exponent(&ComplexityInput::new(OptimizerTag::SgdAdam, 1.0, 32.0), &ns).unwrap();
    assert!((kfac - 3.0).abs() < 0.15, "{kfac}");
    assert!((thermo - 2.0).abs() < 0.15, "{thermo}");
    assert!((sgd - 2.0).abs() < 1e-12, "{sgd}");
}

#[test]
fn worked_examples() {
    let (ops, mem) =
        complexity_estimate(&ComplexityInput::new(OptimizerTag::Kfac, 10.0, 2.0)).unwrap();
    assert_eq!((ops, mem), (2.0 * 100.0 + 1000.0, 20.0 + 100.0));
    let (ops, mem) =
        complexity_estimate(&ComplexityInput::new(OptimizerTag::ThermoKfac, 10.0, 2.0)).unwrap();
    assert_eq!((ops, mem), (200.0 + 100.0, 20.0));
    let (ops, mem) = complexity_estimate(&ComplexityInput::new(
        OptimizerTag::ThermoKfacEma,
        10.0,
        2.0,
    ))
    .unwrap();
    assert_eq!((ops, mem), (300.0, 120.0));
}

#[test]
fn invalid_inputs() {
    assert!(complexity_estimate(&ComplexityInput::new(OptimizerTag::Kfac, 0.5, 1.0)).is_err());
    assert!(amdahl_speedup(1.5, 2.0).is_err());
    assert!(amdahl_speedup(0.5, 0.5).is_err());
    let base = ComplexityInput::new(OptimizerTag::Kfac, 1.0, 1.0);
    assert!(scaling_exponent(&base, &[1.0, 2.0, 3.0]).is_err());
    assert!(scaling_exponent(&base, &[1.0, 2.0, 3.0, 4.0]).is_err());
    assert!("kfac-typo".parse::<OptimizerTag>().is_err());
    for t in OptimizerTag::ALL {
        assert_eq!(t.as_str().parse::<OptimizerTag>().unwrap(), t);
    }
}
