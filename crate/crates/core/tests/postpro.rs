mod common;

use std::collections::BTreeMap;

use socialburden::data::{enumerate_groups, Group, GroupKey};
use socialburden::metrics::group_rates;
use socialburden::models::{Model, ModelSpec, TrainConfig};
use socialburden::postpro::{apply_postpro, fit_postpro, flip_for_target, FlipPolicy, GroupFlip};

fn trained_preds(ds: &socialburden::data::Dataset) -> Vec<u8> {
    let mut m = Model::new(ModelSpec::logistic(), ds.dim(), 1).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.05,
        epochs: 20,
        batch_size: 64,
        seed: 2,
        ..TrainConfig::default()
    };
    m.train_weighted(ds.samples(), &vec![1.0; ds.len()], &cfg)
        .unwrap();
    m.predict_batch(ds.x(), 0.5).unwrap()
}

fn tpr_gap(preds: &[u8], labels: &[u8], groups: &[Group]) -> f64 {
    let tprs: Vec<f64> = groups
        .iter()
        .map(|g| group_rates(preds, labels, &g.rows).unwrap().tpr.unwrap())
        .collect();
    tprs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - tprs.iter().copied().fold(f64::INFINITY, f64::min)
}

#[test]
fn fit_set_gap_closes() {
    let ds = common::toy_dataset(4000, 10);
    let groups = enumerate_groups(&ds, &["grp".to_string()]).unwrap();
    let preds = trained_preds(&ds);
    let before = tpr_gap(&preds, ds.y(), &groups);
    assert!(before > 0.05, "toy groups should start unequal: {before}");
    let policy = fit_postpro(&preds, ds.y(), &groups).unwrap();
    for f in policy.groups.values() {
        assert!((0.0..=1.0).contains(&f.p1) && (0.0..=1.0).contains(&f.p0));
        assert!((f.expected_tpr() - policy.target_tpr).abs() < 1e-12);
    }
    let mean_gap = (0..10)
        .map(|seed| {
            tpr_gap(
                &apply_postpro(&policy, &preds, &groups, seed).unwrap(),
                ds.y(),
                &groups,
            )
        })
        .sum::<f64>()
        / 10.0;
    assert!(mean_gap <= 0.02, "mean gap {mean_gap}");
}

#[test]
fn beats_flipping_everyone_down_to_the_minimum() {
    for seed in 0..5 {
        let ds = common::toy_dataset(2000, 20 + seed);
        let groups = enumerate_groups(&ds, &["grp".to_string()]).unwrap();
        let preds = trained_preds(&ds);
        let policy = fit_postpro(&preds, ds.y(), &groups).unwrap();
        let min_tpr = policy
            .groups
            .values()
            .map(|f| f.base_tpr)
            .fold(f64::INFINITY, f64::min);
        let naive = FlipPolicy {
            target_tpr: min_tpr,
            groups: policy
                .groups
                .iter()
                .map(|(k, f)| {
                    let (p1, p0) = flip_for_target(f.base_tpr, min_tpr);
                    (
                        k.clone(),
                        GroupFlip {
                            p1,
                            p0,
                            base_tpr: f.base_tpr,
                        },
                    )
                })
                .collect(),
        };
        let ours = policy.expected_accuracy(&preds, ds.y(), &groups).unwrap();
        let theirs = naive.expected_accuracy(&preds, ds.y(), &groups).unwrap();
        assert!(ours >= theirs - 1e-12, "{ours} < {theirs}");
    }
}

#[test]
fn halving_the_advantaged_group() {
    // a: TPR 0.8, b: TPR 0.4; many true negatives make thinning the cheap side
    let mut preds = Vec::new();
    let mut labels = Vec::new();
    let mut push = |p: u8, y: u8, k: usize| {
        for _ in 0..k {
            preds.push(p);
            labels.push(y);
        }
    };
    push(1, 1, 8);
    push(0, 1, 2);
    push(0, 0, 90);
    push(1, 1, 4);
    push(0, 1, 6);
    push(0, 0, 90);
    let groups = vec![
        Group {
            key: GroupKey::single("g", "a"),
            rows: (0..100).collect(),
        },
        Group {
            key: GroupKey::single("g", "b"),
            rows: (100..200).collect(),
        },
    ];
    let policy = fit_postpro(&preds, &labels, &groups).unwrap();
    assert!(
        (policy.target_tpr - 0.4).abs() < 1e-12,
        "{}",
        policy.target_tpr
    );
    let a = policy.groups["g=a"];
    assert!((a.p1 - 0.5).abs() < 1e-12 && a.p0 == 0.0);
    assert_eq!(
        (policy.groups["g=b"].p1, policy.groups["g=b"].p0),
        GroupFlip::IDENTITY
    );
}

#[test]
fn target_one_promotes_negatives() {
    for t in [0.0, 0.3, 0.99] {
        let (p1, p0) = flip_for_target(t, 1.0);
        assert_eq!(p1, 1.0);
        assert!(p0 > 0.0);
    }
}

#[test]
fn application_is_per_row() {
    let ds = common::toy_dataset(500, 30);
    let groups = enumerate_groups(&ds, &["grp".to_string()]).unwrap();
    let preds = trained_preds(&ds);
    let policy = FlipPolicy {
        target_tpr: 0.5,
        groups: policy_all(
            &groups,
            GroupFlip {
                p1: 0.5,
                p0: 0.2,
                base_tpr: 0.6,
            },
        ),
    };
    let full = apply_postpro(&policy, &preds, &groups, 4).unwrap();
    assert_eq!(full, apply_postpro(&policy, &preds, &groups, 4).unwrap());
    assert_ne!(full, apply_postpro(&policy, &preds, &groups, 5).unwrap());
    let unseen = FlipPolicy {
        target_tpr: 0.5,
        groups: BTreeMap::new(),
    };
    assert!(apply_postpro(&unseen, &preds, &groups, 4).is_err());
}

fn policy_all(groups: &[Group], f: GroupFlip) -> BTreeMap<String, GroupFlip> {
    groups.iter().map(|g| (g.key.to_string(), f)).collect()
}
