//! Randomized per-group decision flipping that equalizes true positive rates.
//!
//! A group with base TPR `t` can reach any target `tau` by keeping positive
//! decisions with probability `p1` and promoting negative ones with
//! probability `p0`: below `t` it thins acceptances (`p0 = 0`), above `t` it
//! accepts everything it accepted before and promotes a share of the rest
//! (`p1 = 1`). The common target is the candidate with the best expected
//! accuracy on the fit set. Unlike training, this step needs group membership.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Group;
use crate::error::{Error, Result};
use crate::rng;

/// Number of evenly spaced candidate targets in `[0, 1]`.
pub const TARGET_GRID: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupFlip {
    /// Probability of deciding 1 when the base decision is 1.
    pub p1: f64,
    /// Probability of deciding 1 when the base decision is 0.
    pub p0: f64,
    /// TPR of the base decisions on the fit set.
    pub base_tpr: f64,
}

impl GroupFlip {
    pub const IDENTITY: (f64, f64) = (1.0, 0.0);

    /// Expected TPR after flipping.
    pub fn expected_tpr(&self) -> f64 {
        self.p1 * self.base_tpr + self.p0 * (1.0 - self.base_tpr)
    }
}

/// Flip probabilities that move a base TPR to `target` along the cheaper
/// segment of the mixing frontier.
pub fn flip_for_target(base_tpr: f64, target: f64) -> (f64, f64) {
    if target <= base_tpr {
        if base_tpr == 0.0 {
            GroupFlip::IDENTITY
        } else {
            (target / base_tpr, 0.0)
        }
    } else {
        (1.0, (target - base_tpr) / (1.0 - base_tpr))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipPolicy {
    pub target_tpr: f64,
    /// Keyed by the group's display form, e.g. `gender=Female`.
    pub groups: BTreeMap<String, GroupFlip>,
}

impl FlipPolicy {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    fn lookup(&self, group: &Group) -> Result<&GroupFlip> {
        self.groups
            .get(&group.key.to_string())
            .ok_or_else(|| Error::Group(format!("no flip policy for group {}", group.key)))
    }

    /// Expected accuracy of the flipped decisions against `labels`.
    pub fn expected_accuracy(&self, preds: &[u8], labels: &[u8], groups: &[Group]) -> Result<f64> {
        check_lengths(preds, labels)?;
        let mut correct = 0.0;
        let mut n = 0usize;
        for g in groups {
            let flip = self.lookup(g)?;
            let counts = Counts::of(preds, labels, &g.rows)?;
            correct += counts.expected_correct(flip.p1, flip.p0);
            n += g.rows.len();
        }
        Ok(if n == 0 { 0.0 } else { correct / n as f64 })
    }
}

fn check_lengths(preds: &[u8], labels: &[u8]) -> Result<()> {
    if preds.len() != labels.len() {
        return Err(Error::Dimension {
            expected: preds.len(),
            got: labels.len(),
        });
    }
    Ok(())
}

/// Confusion counts of one group.
#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
    tn: usize,
}

impl Counts {
    fn of(preds: &[u8], labels: &[u8], rows: &[usize]) -> Result<Self> {
        let mut c = Counts::default();
        for &r in rows {
            if r >= preds.len() {
                return Err(Error::Group(format!("row {r} out of range")));
            }
            match (preds[r], labels[r]) {
                (1, 1) => c.tp += 1,
                (1, _) => c.fp += 1,
                (_, 1) => c.fn_ += 1,
                _ => c.tn += 1,
            }
        }
        Ok(c)
    }

    fn tpr(&self) -> Option<f64> {
        let pos = self.tp + self.fn_;
        (pos > 0).then(|| self.tp as f64 / pos as f64)
    }

    fn expected_correct(&self, p1: f64, p0: f64) -> f64 {
        p1 * self.tp as f64
            + (1.0 - p1) * self.fp as f64
            + p0 * self.fn_ as f64
            + (1.0 - p0) * self.tn as f64
    }
}

/// Fit per-group flip probabilities on `(preds, labels)`.
///
/// Candidate targets are each group's own base TPR followed by an even grid of
/// [`TARGET_GRID`] values; the first candidate with the highest expected
/// accuracy wins, so ties favour leaving some group untouched.
pub fn fit_postpro(preds: &[u8], labels: &[u8], groups: &[Group]) -> Result<FlipPolicy> {
    check_lengths(preds, labels)?;
    if groups.is_empty() {
        return Err(Error::Group(
            "post-processing needs at least one group".into(),
        ));
    }
    let mut stats = Vec::with_capacity(groups.len());
    for g in groups {
        let counts = Counts::of(preds, labels, &g.rows)?;
        let tpr = counts.tpr().ok_or_else(|| {
            Error::Group(format!(
                "group {} has no positive labels; its TPR is undefined",
                g.key
            ))
        })?;
        stats.push((counts, tpr));
    }
    let candidates = stats
        .iter()
        .map(|&(_, t)| t)
        .chain((0..TARGET_GRID).map(|k| k as f64 / (TARGET_GRID - 1) as f64));
    let mut best: Option<(f64, f64)> = None;
    for target in candidates {
        let correct: f64 = stats
            .iter()
            .map(|(c, t)| {
                let (p1, p0) = flip_for_target(*t, target);
                c.expected_correct(p1, p0)
            })
            .sum();
        if best.is_none_or(|(_, b)| correct > b) {
            best = Some((target, correct));
        }
    }
    let (target, correct) = best.expect("candidates are never empty");
    let n: usize = groups.iter().map(|g| g.rows.len()).sum();
    log::info!(
        "post-processing target TPR {target:.4}, expected fit accuracy {:.4}",
        correct / n.max(1) as f64
    );
    let groups = groups
        .iter()
        .zip(&stats)
        .map(|(g, &(_, t))| {
            let (p1, p0) = flip_for_target(t, target);
            (
                g.key.to_string(),
                GroupFlip {
                    p1,
                    p0,
                    base_tpr: t,
                },
            )
        })
        .collect();
    Ok(FlipPolicy {
        target_tpr: target,
        groups,
    })
}

/// Flip `preds` per the policy. Row `i` draws `uniform(seed, i)`, so the
/// outcome of a row does not depend on the others.
pub fn apply_postpro(
    policy: &FlipPolicy,
    preds: &[u8],
    groups: &[Group],
    seed: u64,
) -> Result<Vec<u8>> {
    let mut flip_of: Vec<Option<&GroupFlip>> = vec![None; preds.len()];
    for g in groups {
        let flip = policy.lookup(g)?;
        for &r in &g.rows {
            let slot = flip_of
                .get_mut(r)
                .ok_or_else(|| Error::Group(format!("row {r} out of range")))?;
            *slot = Some(flip);
        }
    }
    preds
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let flip =
                flip_of[i].ok_or_else(|| Error::Group(format!("row {i} belongs to no group")))?;
            let keep = if p == 1 { flip.p1 } else { flip.p0 };
            Ok(u8::from(rng::uniform_at(seed, i as u64) < keep))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::GroupKey;

    fn group(name: &str, rows: std::ops::Range<usize>) -> Group {
        Group {
            key: GroupKey::single("g", name),
            rows: rows.collect(),
        }
    }

    #[test]
    fn closed_form_flips() {
        assert_eq!(flip_for_target(0.8, 0.4), (0.5, 0.0));
        assert_eq!(flip_for_target(0.4, 0.4), (1.0, 0.0));
        let (p1, p0) = flip_for_target(0.4, 1.0);
        assert_eq!(p1, 1.0);
        assert!(p0 > 0.0 && (p0 - 1.0).abs() < 1e-15);
        assert_eq!(flip_for_target(0.0, 0.0), (1.0, 0.0));
        assert_eq!(flip_for_target(1.0, 1.0), (1.0, 0.0));
        let f = GroupFlip {
            p1: 1.0,
            p0: 0.5,
            base_tpr: 0.2,
        };
        assert!((f.expected_tpr() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn equal_tprs_give_identity() {
        // both groups: 4 TP, 1 FN, 1 FP, 4 TN
        let one = [1u8, 1, 1, 1, 0, 1, 0, 0, 0, 0];
        let lab = [1u8, 1, 1, 1, 1, 0, 0, 0, 0, 0];
        let preds: Vec<u8> = one.iter().chain(&one).copied().collect();
        let labels: Vec<u8> = lab.iter().chain(&lab).copied().collect();
        let groups = [group("a", 0..10), group("b", 10..20)];
        let policy = fit_postpro(&preds, &labels, &groups).unwrap();
        for f in policy.groups.values() {
            assert_eq!((f.p1, f.p0), GroupFlip::IDENTITY);
        }
        assert_eq!(apply_postpro(&policy, &preds, &groups, 9).unwrap(), preds);
    }

    #[test]
    fn apply_edge_policies() {
        let groups = [group("a", 0..4)];
        let mut policy = FlipPolicy {
            target_tpr: 0.0,
            groups: [(
                "g=a".to_string(),
                GroupFlip {
                    p1: 0.0,
                    p0: 0.0,
                    base_tpr: 0.5,
                },
            )]
            .into(),
        };
        assert_eq!(
            apply_postpro(&policy, &[1, 0, 1, 1], &groups, 1).unwrap(),
            vec![0; 4]
        );
        policy.groups.clear();
        assert!(matches!(
            apply_postpro(&policy, &[1, 0, 1, 1], &groups, 1),
            Err(Error::Group(_))
        ));
    }

    #[test]
    fn half_keep_rate_concentrates() {
        let n = 10_000;
        let groups = [group("a", 0..n)];
        let policy = FlipPolicy {
            target_tpr: 0.5,
            groups: [(
                "g=a".to_string(),
                GroupFlip {
                    p1: 0.5,
                    p0: 0.0,
                    base_tpr: 1.0,
                },
            )]
            .into(),
        };
        for seed in 0..10 {
            let out = apply_postpro(&policy, &vec![1; n], &groups, seed).unwrap();
            let frac = out.iter().filter(|&&v| v == 1).count() as f64 / n as f64;
            assert!((0.48..=0.52).contains(&frac), "seed {seed}: {frac}");
        }
    }

    #[test]
    fn group_without_positives_is_named() {
        let groups = [group("a", 0..2), group("b", 2..4)];
        let err = fit_postpro(&[1, 0, 1, 0], &[1, 0, 0, 0], &groups).unwrap_err();
        assert!(err.to_string().contains("g=b"), "{err}");
    }

    #[test]
    fn policy_json_roundtrip() {
        let groups = [group("a", 0..4), group("b", 4..8)];
        let preds = [1, 1, 0, 0, 1, 0, 0, 0];
        let labels = [1, 1, 1, 0, 1, 1, 1, 0];
        let policy = fit_postpro(&preds, &labels, &groups).unwrap();
        let back = FlipPolicy::from_json(&policy.to_json().unwrap()).unwrap();
        assert_eq!(back, policy);
        let a = &policy.groups["g=a"];
        let b = &policy.groups["g=b"];
        assert!((a.expected_tpr() - b.expected_tpr()).abs() < 1e-12);
    }
}
