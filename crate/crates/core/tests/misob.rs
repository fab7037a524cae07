mod common;

use proptest::prelude::*;
use socialburden::misob::{misob_train, phi_weights, round_seed, total_burden, MisobConfig};
use socialburden::models::{Model, ModelSpec, TrainConfig};
use socialburden::recourse::{FailurePolicy, GsConfig, RecourseMethod, WtConfig};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn phi_mass_and_floor(
        burdens in proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..1e3], 1..200),
        c in 0.0f64..5.0,
    ) {
        let w = phi_weights(&burdens, c);
        let n = burdens.len() as f64;
        let total: f64 = burdens.iter().sum();
        prop_assert_eq!(w.len(), burdens.len());
        if total > 0.0 {
            let sum: f64 = w.iter().sum();
            prop_assert!((sum - n * (1.0 + c)).abs() <= 1e-9 * n * (1.0 + c));
            prop_assert!(w.iter().all(|&v| v >= 1.0));
            // order preserving
            for i in 0..burdens.len() {
                for j in 0..burdens.len() {
                    if burdens[i] < burdens[j] {
                        prop_assert!(w[i] <= w[j]);
                    }
                }
            }
        } else {
            prop_assert!(w.iter().all(|&v| v == 1.0));
        }
    }
}

fn small_train(seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: 0.01,
        batch_size: 64,
        seed,
        ..TrainConfig::default()
    }
}

fn cfg(c: f64, rounds: usize) -> MisobConfig {
    MisobConfig {
        c,
        rounds,
        train: small_train(17),
        recourse: RecourseMethod::Wt(WtConfig {
            max_iterations: 300,
            ..WtConfig::default()
        }),
        ..MisobConfig::default()
    }
}

#[test]
fn zero_rounds_is_the_warm_up() {
    let ds = common::toy_dataset(400, 1);
    let mask = ds.schema().mutability_mask();
    let spec = ModelSpec::mlp(vec![16]);
    let c = cfg(0.3, 0);
    let out = misob_train(ds.samples(), &mask, &spec, &c).unwrap();
    assert!(out.rounds.is_empty());
    let mut plain = Model::new(spec, 3, c.train.seed).unwrap();
    let warm = TrainConfig {
        epochs: c.warmup_epochs,
        ..c.train.clone()
    };
    let losses = plain
        .train_weighted(ds.samples(), &vec![1.0; ds.len()], &warm)
        .unwrap();
    assert_eq!(out.warmup_losses, losses);
    assert_eq!(out.model.parameters(), plain.parameters());
}

#[test]
fn zero_strength_is_plain_continued_training() {
    let ds = common::toy_dataset(400, 2);
    let mask = ds.schema().mutability_mask();
    let spec = ModelSpec::mlp(vec![16]);
    let c = cfg(0.0, 3);
    let out = misob_train(ds.samples(), &mask, &spec, &c).unwrap();
    let ones = vec![1.0; ds.len()];
    let mut plain = Model::new(spec, 3, c.train.seed).unwrap();
    let warm = TrainConfig {
        epochs: c.warmup_epochs,
        ..c.train.clone()
    };
    plain.train_weighted(ds.samples(), &ones, &warm).unwrap();
    for t in 1..=3 {
        let round = TrainConfig {
            epochs: 1,
            seed: round_seed(c.train.seed, t),
            ..c.train.clone()
        };
        plain.train_weighted(ds.samples(), &ones, &round).unwrap();
    }
    assert_eq!(out.model.parameters(), plain.parameters());
    assert!(out.rounds.iter().all(|r| r.mean_weight == 1.0));
}

#[test]
fn reweighting_lowers_training_burden_on_toy_data() {
    let ds = common::toy_dataset(1500, 3);
    let mask = ds.schema().mutability_mask();
    let spec = ModelSpec::logistic();
    let mut c = cfg(1.0, 4);
    c.warmup_epochs = 1;
    let out = misob_train(ds.samples(), &mask, &spec, &c).unwrap();
    let first = out.rounds.first().unwrap().total_burden;
    let method = c.recourse.clone();
    let last = total_burden(
        &out.model,
        ds.x(),
        ds.y(),
        &mask,
        &method,
        FailurePolicy::MaxObserved,
    )
    .unwrap();
    assert!(last < first, "first round {first}, after training {last}");
    for r in &out.rounds {
        assert!((r.mean_weight - 1.0 - c.c).abs() < 1e-9 || r.total_burden == 0.0);
    }
}

#[test]
fn rounds_are_deterministic_with_either_method() {
    let ds = common::toy_dataset(300, 4);
    let mask = ds.schema().mutability_mask();
    for method in [
        RecourseMethod::Gs(GsConfig {
            samples_per_shell: 50,
            ..GsConfig::default()
        }),
        RecourseMethod::Wt(WtConfig::default()),
    ] {
        let c = MisobConfig {
            recourse: method,
            rounds: 2,
            ..cfg(0.3, 2)
        };
        let a = misob_train(ds.samples(), &mask, &ModelSpec::mlp(vec![8]), &c).unwrap();
        let b = misob_train(ds.samples(), &mask, &ModelSpec::mlp(vec![8]), &c).unwrap();
        assert_eq!(a.model.parameters(), b.model.parameters());
        assert_eq!(a.rounds, b.rounds);
        let mut csv = Vec::new();
        a.write_log_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 3);
    }
}

#[test]
fn per_batch_weights_average_above_one() {
    let ds = common::toy_dataset(400, 5);
    let mask = ds.schema().mutability_mask();
    let c = MisobConfig {
        per_batch: true,
        ..cfg(0.5, 1)
    };
    let out = misob_train(ds.samples(), &mask, &ModelSpec::logistic(), &c).unwrap();
    let w = out.rounds[0].mean_weight;
    assert!(w > 1.0 && w <= 1.5 + 1e-9, "{w}");
}

#[test]
fn wrong_mask_length_is_rejected() {
    let ds = common::toy_dataset(50, 6);
    assert!(misob_train(ds.samples(), &[true], &ModelSpec::logistic(), &cfg(0.3, 1)).is_err());
}
