//! SGD, Adam and K-FAC on the same seeded two-ring task, with simulated
//! digital and analog time.

use thermo_kfac::kfac::KfacConfig;
use thermo_kfac::nn::{train, DatasetSpec, Optimizer, TrainConfig};

fn main() -> thermo_kfac::Result<()> {
    let base = TrainConfig {
        steps: 100,
        seed: 4,
        dataset: Some(DatasetSpec {
            noise: Some(0.2),
            ..DatasetSpec::rings(600)
        }),
        kfac: KfacConfig {
            damping: 0.01,
            ema_decay_a: 0.95,
            ema_decay_g: 0.95,
            ..KfacConfig::default()
        },
        ..TrainConfig::default()
    };
    let runs = [
        (
            "sgd",
            TrainConfig {
                optimizer: Optimizer::Sgd,
                learning_rate: 0.3,
                ..base.clone()
            },
        ),
        (
            "adam",
            TrainConfig {
                optimizer: Optimizer::Adam,
                learning_rate: 0.01,
                ..base.clone()
            },
        ),
        (
            "kfac",
            TrainConfig {
                optimizer: Optimizer::Kfac,
                ..base.clone()
            },
        ),
    ];
    println!(
        "{:<6} {:>10} {:>10} {:>10}",
        "", "loss", "accuracy", "time (us)"
    );
    for (name, cfg) in runs {
        let out = train(&cfg)?;
        let last = out.records.last().expect("steps > 0");
        println!(
            "{name:<6} {:>10.4} {:>10.3} {:>10.2}",
            last.loss,
            last.accuracy,
            last.total_time_s * 1e6
        );
    }
    Ok(())
}
