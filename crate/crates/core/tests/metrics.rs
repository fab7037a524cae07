use proptest::prelude::*;
use socialburden::data::{Group, GroupKey};
use socialburden::error::Error;
use socialburden::metrics::{evaluate, group_burden, group_cost, group_metrics, Summary};

#[derive(Debug, Clone)]
struct Population {
    costs: Vec<f64>,
    preds: Vec<u8>,
    labels: Vec<u8>,
    groups: Vec<Group>,
}

/// Accepted rows cost 0; denied rows draw a positive cost. Rows are assigned
/// to `k` groups by the drawn membership.
fn population(n: usize) -> impl Strategy<Value = Population> {
    (2usize..5).prop_flat_map(move |k| {
        proptest::collection::vec((0.0f64..1.0, 0.0f64..500.0, any::<bool>(), 0..k), n).prop_map(
            move |rows| {
                let mut costs = Vec::with_capacity(n);
                let mut preds = Vec::with_capacity(n);
                let mut labels = Vec::with_capacity(n);
                let mut members = vec![Vec::new(); k];
                for (i, (u, c, label, g)) in rows.into_iter().enumerate() {
                    let accepted = u < 0.4;
                    preds.push(u8::from(accepted));
                    costs.push(if accepted { 0.0 } else { c });
                    labels.push(u8::from(label));
                    members[g].push(i);
                }
                let groups = members
                    .into_iter()
                    .enumerate()
                    .filter(|(_, rows)| !rows.is_empty())
                    .map(|(g, rows)| Group {
                        key: GroupKey::single("g", g.to_string()),
                        rows,
                    })
                    .collect();
                Population {
                    costs,
                    preds,
                    labels,
                    groups,
                }
            },
        )
    })
}

fn plain_mean(costs: &[f64], rows: impl Iterator<Item = usize>) -> f64 {
    let (s, k) = rows.fold((0.0, 0), |(s, k), r| (s + costs[r], k + 1));
    if k == 0 {
        0.0
    } else {
        s / k as f64
    }
}

/// Conditional mean over denied members times the denial rate.
fn factored(costs: &[f64], preds: &[u8], rows: &[usize]) -> f64 {
    let denied: Vec<usize> = rows.iter().copied().filter(|&r| preds[r] == 0).collect();
    if denied.is_empty() {
        return 0.0;
    }
    let conditional = denied.iter().map(|&r| costs[r]).sum::<f64>() / denied.len() as f64;
    conditional * denied.len() as f64 / rows.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn factored_forms_equal_plain_means(p in population(1000)) {
        for g in &p.groups {
            let plain = plain_mean(&p.costs, g.rows.iter().copied());
            prop_assert!((factored(&p.costs, &p.preds, &g.rows) - plain).abs() < 1e-9);
            prop_assert!((group_cost(&p.costs, &p.preds, &g.rows).unwrap() - plain).abs() < 1e-9);

            let positives: Vec<usize> = g.rows.iter().copied().filter(|&r| p.labels[r] == 1).collect();
            let b = group_burden(&p.costs, &p.preds, &p.labels, &g.rows).unwrap();
            prop_assert_eq!(b.degenerate, positives.is_empty());
            let plain_b = plain_mean(&p.costs, positives.iter().copied());
            prop_assert!((factored(&p.costs, &p.preds, &positives) - plain_b).abs() < 1e-9);
            prop_assert!((b.value - plain_b).abs() < 1e-9);

            let m = group_metrics(g, &p.costs, &p.preds, &p.labels).unwrap();
            if let Some(c) = m.mean_cost_denied {
                prop_assert!((c * (1.0 - m.ar) - m.cost).abs() < 1e-9);
            }
            if let (Some(c), Some(tpr)) = (m.mean_cost_false_negative, m.tpr) {
                prop_assert!((c * (1.0 - tpr) - m.burden).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn metrics_scale_with_costs(p in population(300), k in 0.01f64..50.0) {
        let scaled: Vec<f64> = p.costs.iter().map(|c| c * k).collect();
        let a = evaluate(&p.costs, &p.preds, &p.labels, &p.groups, 0.0).unwrap();
        let b = evaluate(&scaled, &p.preds, &p.labels, &p.groups, 0.0).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * y.abs().max(1.0);
        prop_assert!(close(b.cost.worst, k * a.cost.worst));
        prop_assert!(close(b.burden.worst, k * a.burden.worst));
        prop_assert!(close(b.burden.gap, k * a.burden.gap));
        prop_assert_eq!(a.tpr, b.tpr);
        prop_assert_eq!(a.ar, b.ar);
        prop_assert_eq!(a.accuracy, b.accuracy);
    }

    #[test]
    fn report_summaries_match_group_rows(p in population(300)) {
        let r = evaluate(&p.costs, &p.preds, &p.labels, &p.groups, 0.25).unwrap();
        prop_assert_eq!(r.failure_rate, 0.25);
        let burdens: Vec<f64> = r.groups.iter().map(|g| g.burden).collect();
        let ars: Vec<f64> = r.groups.iter().map(|g| g.ar).collect();
        let max_b = burdens.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min_b = burdens.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(r.burden.worst, max_b);
        prop_assert_eq!(r.burden.gap, max_b - min_b);
        let min_ar = ars.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(r.ar.worst, min_ar);
        let correct = p.preds.iter().zip(&p.labels).filter(|(a, b)| a == b).count();
        prop_assert!((r.accuracy - correct as f64 / p.preds.len() as f64).abs() < 1e-12);
    }
}

#[test]
fn accepted_rows_with_cost_break_the_identity() {
    let err = group_cost(&[1.0, 2.0], &[1, 0], &[0, 1]).unwrap_err();
    assert!(matches!(err, Error::Invariant(_)), "{err}");
}

#[test]
fn summary_picks_the_worst_side() {
    let s = Summary::of(&[0.2, 0.7, 0.5], true).unwrap();
    assert_eq!((s.worst, s.gap), (0.7, 0.7 - 0.2));
    let s = Summary::of(&[0.2, 0.7, 0.5], false).unwrap();
    assert_eq!(s.worst, 0.2);
    assert!(Summary::of(&[], true).is_none());
}

#[test]
fn worked_example() {
    // group a: 10 of 100 denied at cost 1; group b: 100 of 1000 denied at cost 1
    let mut costs = Vec::new();
    let mut preds = Vec::new();
    for (n, denied) in [(100, 10), (1000, 100)] {
        for i in 0..n {
            let d = i < denied;
            preds.push(u8::from(!d));
            costs.push(if d { 1.0 } else { 0.0 });
        }
    }
    let a: Vec<usize> = (0..100).collect();
    let b: Vec<usize> = (100..1100).collect();
    let ca = group_cost(&costs, &preds, &a).unwrap();
    let cb = group_cost(&costs, &preds, &b).unwrap();
    assert!((ca - 0.1).abs() < 1e-15 && (cb - 0.1).abs() < 1e-15);
}
