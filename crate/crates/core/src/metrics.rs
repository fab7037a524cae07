//! Group fairness metrics built on per-row recourse costs.
//!
//! Group cost is the expected recourse cost over the whole group; it factors
//! into mean cost among denied members times the group's denial rate. Social
//! burden does the same over members whose true label is positive, with the
//! false negative rate as the second factor. Since accepted rows cost nothing,
//! both factored forms equal plain means over the group. Every computation
//! evaluates both forms and fails with [`Error::Invariant`] if they disagree.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Group, GroupKey};
use crate::error::{Error, Result};

/// Largest tolerated disagreement between factored and plain forms.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

fn check_aligned(
    costs: Option<&[f64]>,
    preds: &[u8],
    labels: Option<&[u8]>,
    rows: &[usize],
) -> Result<()> {
    let n = preds.len();
    if let Some(c) = costs {
        if c.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: c.len(),
            });
        }
    }
    if let Some(l) = labels {
        if l.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: l.len(),
            });
        }
    }
    if rows.is_empty() {
        return Err(Error::Group("empty group".into()));
    }
    if let Some(&r) = rows.iter().find(|&&r| r >= n) {
        return Err(Error::Group(format!("row {r} out of range for {n} rows")));
    }
    Ok(())
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, k) = values.fold((0.0, 0usize), |(s, k), v| (s + v, k + 1));
    (k > 0).then(|| s / k as f64)
}

fn cross_check(what: &str, factored: f64, plain: f64) -> Result<()> {
    if (factored - plain).abs() > IDENTITY_TOLERANCE {
        return Err(Error::Invariant(format!(
            "{what}: factored form {factored} != plain mean {plain}; \
             accepted rows must carry zero cost"
        )));
    }
    Ok(())
}

/// Factored and plain forms of an expected cost over `rows`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Decomposed {
    value: f64,
    /// Mean cost over the denied subset, if it is non-empty.
    conditional: Option<f64>,
}

fn decompose(what: &str, costs: &[f64], preds: &[u8], rows: &[usize]) -> Result<Decomposed> {
    let denied: Vec<usize> = rows.iter().copied().filter(|&r| preds[r] == 0).collect();
    let conditional = mean(denied.iter().map(|&r| costs[r]));
    let denial_rate = denied.len() as f64 / rows.len() as f64;
    let factored = conditional.map_or(0.0, |c| c * denial_rate);
    let plain = mean(rows.iter().map(|&r| costs[r])).unwrap_or(0.0);
    cross_check(what, factored, plain)?;
    Ok(Decomposed {
        value: factored,
        conditional,
    })
}

/// Expected recourse cost over a group (0 when nobody in it is denied).
pub fn group_cost(costs: &[f64], preds: &[u8], rows: &[usize]) -> Result<f64> {
    check_aligned(Some(costs), preds, None, rows)?;
    Ok(decompose("group cost", costs, preds, rows)?.value)
}

/// Social burden of a group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Burden {
    pub value: f64,
    /// The group has no positive-label members; `value` is 0 by convention.
    pub degenerate: bool,
}

/// Expected recourse cost over the group's positive-label members.
pub fn group_burden(costs: &[f64], preds: &[u8], labels: &[u8], rows: &[usize]) -> Result<Burden> {
    check_aligned(Some(costs), preds, Some(labels), rows)?;
    let positives: Vec<usize> = rows.iter().copied().filter(|&r| labels[r] == 1).collect();
    if positives.is_empty() {
        return Ok(Burden {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(Burden {
        value: decompose("social burden", costs, preds, &positives)?.value,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    /// `None` when the group has no positive labels.
    pub tpr: Option<f64>,
    pub ar: f64,
    pub accuracy: f64,
}

pub fn group_rates(preds: &[u8], labels: &[u8], rows: &[usize]) -> Result<Rates> {
    check_aligned(None, preds, Some(labels), rows)?;
    let n = rows.len() as f64;
    let accepted = rows.iter().filter(|&&r| preds[r] == 1).count();
    let correct = rows.iter().filter(|&&r| preds[r] == labels[r]).count();
    let positives = rows.iter().filter(|&&r| labels[r] == 1).count();
    let hits = rows
        .iter()
        .filter(|&&r| labels[r] == 1 && preds[r] == 1)
        .count();
    Ok(Rates {
        tpr: (positives > 0).then(|| hits as f64 / positives as f64),
        ar: accepted as f64 / n,
        accuracy: correct as f64 / n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub group: GroupKey,
    pub n: usize,
    pub cost: f64,
    pub burden: f64,
    pub tpr: Option<f64>,
    pub ar: f64,
    pub accuracy: f64,
    /// Mean cost among denied members.
    pub mean_cost_denied: Option<f64>,
    /// Mean cost among denied positive-label members.
    pub mean_cost_false_negative: Option<f64>,
    /// Nobody in the group is denied.
    pub no_denied: bool,
    /// The group has no positive labels, so burden and TPR are undefined.
    pub no_positive_labels: bool,
}

pub fn group_metrics(
    group: &Group,
    costs: &[f64],
    preds: &[u8],
    labels: &[u8],
) -> Result<GroupMetrics> {
    let rows = &group.rows;
    check_aligned(Some(costs), preds, Some(labels), rows)
        .map_err(|e| Error::Group(format!("group {}: {e}", group.key)))?;
    let cost = decompose("group cost", costs, preds, rows)?;
    let burden = group_burden(costs, preds, labels, rows)?;
    let positives: Vec<usize> = rows.iter().copied().filter(|&r| labels[r] == 1).collect();
    let fn_mean = mean(
        positives
            .iter()
            .filter(|&&r| preds[r] == 0)
            .map(|&r| costs[r]),
    );
    let rates = group_rates(preds, labels, rows)?;
    Ok(GroupMetrics {
        group: group.key.clone(),
        n: rows.len(),
        cost: cost.value,
        burden: burden.value,
        tpr: rates.tpr,
        ar: rates.ar,
        accuracy: rates.accuracy,
        mean_cost_denied: cost.conditional,
        mean_cost_false_negative: fn_mean,
        no_denied: cost.conditional.is_none(),
        no_positive_labels: burden.degenerate,
    })
}

/// Worst-group value and max-minus-min gap of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub worst: f64,
    pub gap: f64,
}

impl Summary {
    /// `higher_is_worse` picks max (costs) or min (rates) as the worst value.
    pub fn of(values: &[f64], higher_is_worse: bool) -> Option<Self> {
        let max = values.iter().copied().reduce(f64::max)?;
        let min = values.iter().copied().reduce(f64::min)?;
        Some(Self {
            worst: if higher_is_worse { max } else { min },
            gap: max - min,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub accuracy: f64,
    pub failure_rate: f64,
    pub burden: Summary,
    /// Over groups with at least one positive label.
    pub tpr: Summary,
    pub cost: Summary,
    pub ar: Summary,
    pub groups: Vec<GroupMetrics>,
}

pub fn aggregate_report(
    groups: Vec<GroupMetrics>,
    accuracy: f64,
    failure_rate: f64,
) -> Result<FairnessReport> {
    if groups.is_empty() {
        return Err(Error::Group("report needs at least one group".into()));
    }
    let pick = |f: fn(&GroupMetrics) -> f64| groups.iter().map(f).collect::<Vec<_>>();
    let burdens: Vec<f64> = groups
        .iter()
        .filter(|g| !g.no_positive_labels)
        .map(|g| g.burden)
        .collect();
    let tprs: Vec<f64> = groups.iter().filter_map(|g| g.tpr).collect();
    let zero = Summary {
        worst: 0.0,
        gap: 0.0,
    };
    Ok(FairnessReport {
        accuracy,
        failure_rate,
        burden: Summary::of(&burdens, true).unwrap_or(zero),
        tpr: Summary::of(&tprs, false).unwrap_or(zero),
        cost: Summary::of(&pick(|g| g.cost), true).expect("non-empty"),
        ar: Summary::of(&pick(|g| g.ar), false).expect("non-empty"),
        groups,
    })
}

/// Full report for one set of groups.
pub fn evaluate(
    costs: &[f64],
    preds: &[u8],
    labels: &[u8],
    groups: &[Group],
    failure_rate: f64,
) -> Result<FairnessReport> {
    let all: Vec<usize> = (0..preds.len()).collect();
    let overall = group_rates(preds, labels, &all)?;
    let per_group = groups
        .iter()
        .map(|g| group_metrics(g, costs, preds, labels))
        .collect::<Result<Vec<_>>>()?;
    aggregate_report(per_group, overall.accuracy, failure_rate)
}

/// Column names of the headline table, in order.
pub const HEADLINE_COLUMNS: [&str; 10] = [
    "accuracy",
    "burden_worst",
    "burden_gap",
    "tpr_worst",
    "tpr_gap",
    "cost_worst",
    "cost_gap",
    "ar_worst",
    "ar_gap",
    "failure_rate",
];

impl FairnessReport {
    /// Values matching [`HEADLINE_COLUMNS`].
    pub fn headline(&self) -> [f64; 10] {
        [
            self.accuracy,
            self.burden.worst,
            self.burden.gap,
            self.tpr.worst,
            self.tpr.gap,
            self.cost.worst,
            self.cost.gap,
            self.ar.worst,
            self.ar.gap,
            self.failure_rate,
        ]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    /// One row per group, then `worst` and `gap` rows.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "row",
            "group",
            "n",
            "accuracy",
            "burden",
            "tpr",
            "cost",
            "ar",
            "mean_cost_denied",
            "mean_cost_false_negative",
            "flags",
        ])?;
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for g in &self.groups {
            let mut flags = Vec::new();
            if g.no_denied {
                flags.push("no_denied");
            }
            if g.no_positive_labels {
                flags.push("no_positive_labels");
            }
            w.write_record([
                "group".to_string(),
                g.group.to_string(),
                g.n.to_string(),
                g.accuracy.to_string(),
                g.burden.to_string(),
                opt(g.tpr),
                g.cost.to_string(),
                g.ar.to_string(),
                opt(g.mean_cost_denied),
                opt(g.mean_cost_false_negative),
                flags.join("|"),
            ])?;
        }
        let n: usize = self.groups.iter().map(|g| g.n).sum();
        for (label, pick) in [
            ("worst", (|s: &Summary| s.worst) as fn(&Summary) -> f64),
            ("gap", |s: &Summary| s.gap),
        ] {
            w.write_record([
                label.to_string(),
                String::new(),
                n.to_string(),
                if label == "worst" {
                    self.accuracy.to_string()
                } else {
                    String::new()
                },
                pick(&self.burden).to_string(),
                pick(&self.tpr).to_string(),
                pick(&self.cost).to_string(),
                pick(&self.ar).to_string(),
                String::new(),
                String::new(),
                if label == "worst" {
                    format!("failure_rate={}", self.failure_rate)
                } else {
                    String::new()
                },
            ])?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<report csv>".into(),
            source: e,
        })
    }
}
