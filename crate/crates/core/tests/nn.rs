use std::path::Path;

use proptest::prelude::*;
use thermo_kfac::corpus::gaussian_matrix;
use thermo_kfac::harness::ExperimentConfig;
use thermo_kfac::matrix::DenseMatrix;
use thermo_kfac::nn::{
    loss_value, mlp_backward, mlp_forward, train, Activation, DatasetSpec, Labels, Loss, MlpModel,
    Optimizer, TrainConfig, Trainer,
};
use thermo_kfac::rng::stream_rng;

fn model(seed: u64, sizes: &[usize], act: Activation) -> MlpModel {
    MlpModel::init(sizes, act, &mut stream_rng(seed, 0)).unwrap()
}

fn labels_for(loss: Loss, seed: u64, b: usize, c: usize) -> Labels {
    match loss {
        Loss::SoftmaxCrossEntropy => {
            Labels::Classes((0..b).map(|k| (k * 7 + seed as usize) % c).collect())
        }
        Loss::MeanSquaredError => Labels::Targets(gaussian_matrix(b, c, &mut stream_rng(seed, 9))),
    }
}

/// Central differences on every weight of every layer against backprop.
fn finite_difference_check(seed: u64, act: Activation, loss: Loss) {
    let sizes = [4, 6, 5, 3];
    let net = model(seed, &sizes, act);
    let x = gaussian_matrix(7, 4, &mut stream_rng(seed, 1));
    let labels = labels_for(loss, seed, 7, 3);
    let (logits, cache) = mlp_forward(&net, &x).unwrap();
    let trace = mlp_backward(&net, &cache, &logits, &labels, loss).unwrap();
    let objective =
        |m: &MlpModel| loss_value(&mlp_forward(m, &x).unwrap().0, &labels, loss).unwrap();
    let h = 1e-6;
    for l in 0..net.layers().len() {
        let w = net.layer_weights(l).clone();
        let analytic = &trace.grads[l].d_theta;
        for i in 0..w.rows() {
            for j in 0..w.cols() {
                let bumped = |delta: f64| {
                    let mut m = net.clone();
                    let mut wd = w.clone();
                    wd[(i, j)] += delta;
                    m.set_layer_weights(l, wd).unwrap();
                    objective(&m)
                };
                let fd = (bumped(h) - bumped(-h)) / (2.0 * h);
                let an = analytic[(i, j)];
                assert!(
                    (fd - an).abs() <= 1e-4 * (fd.abs() + an.abs()) + 1e-8,
                    "{act:?} {loss:?} layer {l} ({i},{j}): fd {fd} vs backprop {an}"
                );
            }
        }
    }
}

#[test]
fn backprop_matches_finite_differences() {
    for loss in [Loss::SoftmaxCrossEntropy, Loss::MeanSquaredError] {
        for act in [Activation::Tanh, Activation::Relu, Activation::Identity] {
            for seed in 0..3 {
                finite_difference_check(seed, act, loss);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gradient_is_the_mean_outer_product(seed in any::<u64>(), b in 1usize..20, w1 in 1usize..8, w2 in 1usize..8) {
        let net = model(seed, &[3, w1, w2, 2], Activation::Tanh);
        let x = gaussian_matrix(b, 3, &mut stream_rng(seed, 1));
        let (logits, cache) = mlp_forward(&net, &x).unwrap();
        let trace = mlp_backward(&net, &cache, &logits, &labels_for(Loss::SoftmaxCrossEntropy, seed, b, 2), Loss::SoftmaxCrossEntropy).unwrap();
        prop_assert!(trace.outer_product_residual() <= 1e-12);
    }
}

fn blobs_config() -> TrainConfig {
    TrainConfig {
        dataset: Some(DatasetSpec::blobs(200)),
        steps: 20,
        hidden: vec![6, 5],
        seed: 4,
        ..TrainConfig::default()
    }
}

#[test]
fn outer_product_identity_holds_for_a_hundred_steps() {
    for optimizer in [Optimizer::Kfac, Optimizer::Adam] {
        let mut t = Trainer::new(TrainConfig {
            steps: 100,
            optimizer,
            ..blobs_config()
        })
        .unwrap();
        for _ in 0..100 {
            let (_, trace) = t.step().unwrap();
            assert!(trace.outer_product_residual() <= 1e-12);
        }
        assert_eq!(t.steps_done(), 100);
    }
}

#[test]
fn identical_configs_give_identical_series() {
    for optimizer in [Optimizer::Sgd, Optimizer::Adam, Optimizer::Kfac] {
        let cfg = TrainConfig {
            optimizer,
            ..blobs_config()
        };
        let a = train(&cfg).unwrap();
        let b = train(&cfg).unwrap();
        assert_eq!(a, b);
        let c = train(&TrainConfig { seed: 5, ..cfg }).unwrap();
        assert_ne!(a.records, c.records);
    }
}

#[test]
fn identity_factor_kfac_follows_the_sgd_trajectory() {
    let base = blobs_config();
    let mut sgd = Trainer::new(TrainConfig {
        optimizer: Optimizer::Sgd,
        learning_rate: 0.3,
        ..base.clone()
    })
    .unwrap();
    let mut kfac_cfg = TrainConfig {
        optimizer: Optimizer::Kfac,
        ..base
    };
    kfac_cfg.kfac.identity_factors = true;
    kfac_cfg.kfac.damping = 0.0;
    kfac_cfg.kfac.learning_rate = 0.3;
    let mut kfac = Trainer::new(kfac_cfg).unwrap();
    for _ in 0..20 {
        let (a, _) = sgd.step().unwrap();
        let (b, _) = kfac.step().unwrap();
        assert_eq!((a.loss, a.accuracy), (b.loss, b.accuracy));
    }
    assert_eq!(sgd.model(), kfac.model());
}

#[test]
fn exact_kfac_fits_two_blobs() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/train_blobs.toml");
    let cfg = ExperimentConfig::load(&path).unwrap();
    let out = train(&cfg.train).unwrap();
    assert!(out.final_loss() <= 0.1, "final loss {}", out.final_loss());
    assert!(out.final_loss() < out.initial_loss);
}

#[test]
fn zero_learning_rate_keeps_the_loss() {
    for optimizer in [Optimizer::Sgd, Optimizer::Adam, Optimizer::Kfac] {
        let mut cfg = TrainConfig {
            optimizer,
            learning_rate: 0.0,
            ..blobs_config()
        };
        cfg.kfac.learning_rate = 0.0;
        let out = train(&cfg).unwrap();
        for r in &out.records {
            assert!(
                (r.loss - out.initial_loss).abs() <= 1e-12 * out.initial_loss.max(1.0),
                "{optimizer:?}"
            );
        }
    }
}

#[test]
fn zero_steps_evaluates_only_the_initial_model() {
    let out = train(&TrainConfig {
        steps: 0,
        ..blobs_config()
    })
    .unwrap();
    assert!(out.records.is_empty());
    assert_eq!(out.final_loss(), out.initial_loss);
    assert_eq!(out.final_accuracy(), out.initial_accuracy);
}

#[test]
fn simulated_time_accumulates() {
    let out = train(&blobs_config()).unwrap();
    for w in out.records.windows(2) {
        assert!(w[1].digital_time_s > w[0].digital_time_s);
        assert!(w[1].analog_time_s >= w[0].analog_time_s);
    }
    for r in &out.records {
        assert_eq!(r.analog_time_s, 0.0);
        assert!(
            (r.total_time_s - r.digital_time_s - r.analog_time_s).abs() <= 1e-15 * r.total_time_s
        );
    }
}

#[test]
fn configuration_errors() {
    assert!(train(&TrainConfig::default()).is_err());
    assert!(train(&TrainConfig {
        batch_size: 0,
        ..blobs_config()
    })
    .is_err());
    assert!(train(&TrainConfig {
        hidden: vec![4, 0],
        ..blobs_config()
    })
    .is_err());
    assert!(train(&TrainConfig {
        dataset: Some(DatasetSpec::blobs(2)),
        ..blobs_config()
    })
    .is_err());
    let bad = MlpModel::init(&[3], Activation::Tanh, &mut stream_rng(0, 0));
    assert!(bad.is_err());
    let net = model(0, &[2, 3, 2], Activation::Tanh);
    assert!(mlp_forward(&net, &DenseMatrix::zeros(4, 3)).is_err());
}
