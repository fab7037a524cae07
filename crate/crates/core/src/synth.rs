//! Synthetic populations where per-denied recourse cost is equal across groups
//! while the expected cost per group member is not.
//!
//! Decisions and costs are planted rather than learned: each group gets exactly
//! `round(size * acceptance_rate)` acceptances, and every denied row draws a
//! cost around a shared mean.

use std::io::Write;
use std::sync::Arc;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{enumerate_groups, Dataset, FeatureSchema, FeatureSpec, SensitiveTable};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, FairnessReport};
use crate::rng;

/// Name of the single sensitive column of generated data.
pub const GROUP_ATTR: &str = "group";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParadoxGroup {
    pub name: String,
    pub size: usize,
    pub acceptance_rate: f64,
    pub label_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParadoxSpec {
    pub groups: Vec<ParadoxGroup>,
    /// Mean cost of a denied row, shared by all groups.
    pub mean_cost: f64,
    /// Standard deviation of the per-row cost noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for ParadoxSpec {
    fn default() -> Self {
        let group = |name: &str, ar: f64| ParadoxGroup {
            name: name.into(),
            size: 1000,
            acceptance_rate: ar,
            label_rate: 0.5,
        };
        Self {
            groups: vec![group("A", 0.0), group("B", 0.9)],
            mean_cost: 0.1,
            noise: 0.01,
            seed: 0,
        }
    }
}

impl ParadoxSpec {
    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::Config(
                "paradox spec needs at least one group".into(),
            ));
        }
        for g in &self.groups {
            if g.size == 0 {
                return Err(Error::Config(format!("group {:?} has size 0", g.name)));
            }
            for (what, v) in [
                ("acceptance rate", g.acceptance_rate),
                ("label rate", g.label_rate),
            ] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Config(format!(
                        "group {:?}: {what} {v} is outside [0, 1]",
                        g.name
                    )));
                }
            }
        }
        if !(self.mean_cost >= 0.0) || !(self.noise >= 0.0) {
            return Err(Error::Config("mean cost and noise must be >= 0".into()));
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: Self = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
pub struct Paradox {
    pub dataset: Dataset,
    pub decisions: Vec<u8>,
    pub costs: Vec<f64>,
}

/// Planted population for `spec`. The dataset carries one uninformative
/// feature so it can flow through the usual pipeline.
pub fn generate_paradox(spec: &ParadoxSpec) -> Result<Paradox> {
    spec.validate()?;
    let n: usize = spec.groups.iter().map(|g| g.size).sum();
    let mut rng = rng::stream(spec.seed, 0x5a);
    let mut x = Array2::zeros((n, 1));
    let mut y = Vec::with_capacity(n);
    let mut decisions = Vec::with_capacity(n);
    let mut costs = Vec::with_capacity(n);
    let mut members = Vec::with_capacity(n);
    for g in &spec.groups {
        let accepted = (g.size as f64 * g.acceptance_rate).round() as usize;
        let positives = (g.size as f64 * g.label_rate).round() as usize;
        let mut d: Vec<u8> = (0..g.size).map(|i| u8::from(i < accepted)).collect();
        let mut l: Vec<u8> = (0..g.size).map(|i| u8::from(i < positives)).collect();
        d.shuffle(&mut rng);
        l.shuffle(&mut rng);
        for (&di, &li) in d.iter().zip(&l) {
            let cost = if di == 1 {
                0.0
            } else {
                let z: f64 = rng.sample(StandardNormal);
                (spec.mean_cost + spec.noise * z).max(0.0)
            };
            x[[members.len(), 0]] = rng.random::<f64>();
            decisions.push(di);
            y.push(li);
            costs.push(cost);
            members.push(vec![g.name.clone()]);
        }
    }
    let schema = FeatureSchema {
        label: "label".into(),
        features: vec![
            FeatureSpec::numeric("u", 0.0, 1.0),
            FeatureSpec::categorical(GROUP_ATTR, spec.groups.iter().map(|g| g.name.clone()))
                .sensitive(),
        ],
        ignored: Vec::new(),
    };
    let table = SensitiveTable::new(vec![GROUP_ATTR.into()], members)?;
    let dataset = Dataset::new("paradox", x, y, table, Arc::new(schema))?;
    Ok(Paradox {
        dataset,
        decisions,
        costs,
    })
}

/// Per-group values of the two competing cost notions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParadoxRow {
    pub group: String,
    pub n: usize,
    pub acceptance_rate: f64,
    /// Mean cost over denied members only.
    pub mean_cost_denied: f64,
    /// Expected cost over all members.
    pub group_cost: f64,
    pub burden: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParadoxSummary {
    pub rows: Vec<ParadoxRow>,
    /// `(max - min) / min` of the denied-only mean cost.
    pub conventional_relative_gap: f64,
    /// `(max - min) / min` of the expected group cost.
    pub holistic_relative_gap: f64,
}

fn relative_gap(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = values.fold(f64::INFINITY, f64::min);
    if max == min {
        0.0
    } else if min == 0.0 {
        f64::INFINITY
    } else {
        (max - min) / min
    }
}

pub fn report(p: &Paradox) -> Result<FairnessReport> {
    let groups = enumerate_groups(&p.dataset, &[GROUP_ATTR.to_string()])?;
    evaluate(&p.costs, &p.decisions, p.dataset.y(), &groups, 0.0)
}

pub fn summarize(p: &Paradox) -> Result<ParadoxSummary> {
    let report = report(p)?;
    let rows: Vec<ParadoxRow> = report
        .groups
        .iter()
        .map(|g| ParadoxRow {
            group: g
                .group
                .0
                .first()
                .map(|(_, v)| v.clone())
                .unwrap_or_default(),
            n: g.n,
            acceptance_rate: g.ar,
            mean_cost_denied: g.mean_cost_denied.unwrap_or(0.0),
            group_cost: g.cost,
            burden: g.burden,
        })
        .collect();
    Ok(ParadoxSummary {
        conventional_relative_gap: relative_gap(rows.iter().map(|r| r.mean_cost_denied)),
        holistic_relative_gap: relative_gap(rows.iter().map(|r| r.group_cost)),
        rows,
    })
}

impl ParadoxSummary {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io("<paradox csv>", e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_counts_are_exact() {
        let p = generate_paradox(&ParadoxSpec::default()).unwrap();
        let (a, b) = p.decisions.split_at(1000);
        assert_eq!(a.iter().filter(|&&d| d == 1).count(), 0);
        assert_eq!(b.iter().filter(|&&d| d == 1).count(), 900);
        assert_eq!(p.dataset.class_counts(), (1000, 1000));
        assert!(p
            .decisions
            .iter()
            .zip(&p.costs)
            .all(|(&d, &c)| d == 0 || c == 0.0));
    }

    #[test]
    fn default_spec_shows_the_paradox() {
        let s = summarize(&generate_paradox(&ParadoxSpec::default()).unwrap()).unwrap();
        assert!(s.conventional_relative_gap < 0.05, "{s:?}");
        assert!(s.holistic_relative_gap > 4.0, "{s:?}");
        assert!(s.rows[0].group_cost / s.rows[1].group_cost >= 5.0);
    }

    #[test]
    fn zero_noise_is_exact() {
        let spec = ParadoxSpec {
            noise: 0.0,
            ..ParadoxSpec::default()
        };
        let s = summarize(&generate_paradox(&spec).unwrap()).unwrap();
        for (r, ar) in s.rows.iter().zip([0.0, 0.9]) {
            assert!((r.group_cost - 0.1 * (1.0 - ar)).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_rates_no_paradox() {
        let mut spec = ParadoxSpec::default();
        spec.groups[1].acceptance_rate = 0.0;
        let s = summarize(&generate_paradox(&spec).unwrap()).unwrap();
        assert!(s.holistic_relative_gap < 0.05);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = ParadoxSpec::default();
        spec.groups[0].acceptance_rate = 1.5;
        assert!(generate_paradox(&spec).is_err());
        spec.groups.clear();
        assert!(spec.validate().is_err());
    }
}
