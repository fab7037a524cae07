//! Burden-reweighted training.
//!
//! After a warm-up on uniform weights, each round prices recourse for every
//! training row that has a positive label but is denied, turns those costs into
//! per-row loss weights `1 + C * N * b_i / B`, and trains one more epoch.
//! Only features and labels are ever passed in; group membership is not an
//! input to anything here.

use std::io::Write;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::data::Samples;
use crate::error::{Error, Result};
use crate::models::{Model, ModelSpec, TrainConfig};
use crate::recourse::{
    recourse_for_decisions, CostFunction, FailurePolicy, RecourseMethod, WtConfig, THRESHOLD,
};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MisobConfig {
    /// Strength of the burden term.
    pub c: f64,
    pub warmup_epochs: usize,
    /// Reweighting rounds, one epoch each.
    pub rounds: usize,
    /// Learning rate, batch size, optimizer and master seed; `epochs` is ignored.
    pub train: TrainConfig,
    pub recourse: RecourseMethod,
    pub failure_policy: FailurePolicy,
    /// Normalize weights within each minibatch (N = batch size, B = batch
    /// burden) instead of over the whole training set.
    pub per_batch: bool,
    /// Start every round (and the first round after warm-up) with fresh
    /// optimizer moments.
    pub reset_optimizer: bool,
}

impl Default for MisobConfig {
    fn default() -> Self {
        Self {
            c: 0.3,
            warmup_epochs: 3,
            rounds: 3,
            train: TrainConfig::default(),
            recourse: RecourseMethod::Wt(WtConfig::default()),
            failure_policy: FailurePolicy::MaxObserved,
            per_batch: false,
            reset_optimizer: true,
        }
    }
}

impl MisobConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 0.0) || !self.c.is_finite() {
            return Err(Error::Config(format!(
                "C must be a finite value >= 0, got {}",
                self.c
            )));
        }
        self.train.validate()?;
        self.recourse.validate()
    }
}

/// Per-row burdens of one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurdenLedger {
    pub burdens: Vec<f64>,
    pub total: f64,
    pub round: usize,
    /// Rows that needed recourse (positive label, denied).
    pub attempted: usize,
    pub failures: usize,
}

/// Recourse cost for each positive-label row the model denies; 0 elsewhere.
pub fn compute_burdens(
    model: &Model,
    samples: Samples<'_>,
    mask: &[bool],
    method: &RecourseMethod,
    policy: FailurePolicy,
    round: usize,
) -> Result<BurdenLedger> {
    let preds = model.predict_batch(samples.x, THRESHOLD)?;
    let decisions: Vec<u8> = preds
        .iter()
        .zip(samples.y)
        .map(|(&p, &y)| u8::from(!(y == 1 && p == 0)))
        .collect();
    let cost = CostFunction::evaluation(mask.to_vec());
    let pop = recourse_for_decisions(model, samples.x, &decisions, method, &cost, policy)?;
    let total = pop.costs.iter().sum();
    Ok(BurdenLedger {
        burdens: pop.costs,
        total,
        round,
        attempted: pop.attempted,
        failures: pop.failures,
    })
}

/// `1 + C * N * b_i / B`, or all ones when `B = 0`. `N` is `burdens.len()`.
pub fn phi_weights(burdens: &[f64], c: f64) -> Vec<f64> {
    let total: f64 = burdens.iter().sum();
    if !(total > 0.0) {
        return vec![1.0; burdens.len()];
    }
    let n = burdens.len() as f64;
    burdens.iter().map(|b| 1.0 + c * n * b / total).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub total_burden: f64,
    pub attempted: usize,
    pub failures: usize,
    pub mean_weight: f64,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct MisobOutcome {
    pub model: Model,
    pub warmup_losses: Vec<f64>,
    pub rounds: Vec<RoundLog>,
}

impl MisobOutcome {
    pub fn write_log_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rounds {
            w.serialize(r)?;
        }
        if self.rounds.is_empty() {
            w.write_record([
                "round",
                "total_burden",
                "attempted",
                "failures",
                "mean_weight",
                "loss",
            ])?;
        }
        w.flush().map_err(|e| Error::io("<training log>", e))
    }
}

/// Shuffle seed of reweighting round `round` (1-based).
pub fn round_seed(base: u64, round: usize) -> u64 {
    rng::derive(base, round as u64)
}

/// Warm-up followed by `cfg.rounds` burden-weighted epochs. Round `t` shuffles
/// with [`round_seed`] and, unless `reset_optimizer` is off, a fresh optimizer.
pub fn misob_train(
    samples: Samples<'_>,
    mask: &[bool],
    spec: &ModelSpec,
    cfg: &MisobConfig,
) -> Result<MisobOutcome> {
    cfg.validate()?;
    if mask.len() != samples.dim() {
        return Err(Error::Dimension {
            expected: samples.dim(),
            got: mask.len(),
        });
    }
    let mut model = Model::new(spec.clone(), samples.dim(), cfg.train.seed)?;
    let warmup = TrainConfig {
        epochs: cfg.warmup_epochs,
        ..cfg.train.clone()
    };
    let mut optimizer = None;
    let warmup_losses = model.train_with(samples, &warmup, &mut optimizer, |rows| {
        vec![1.0; rows.len()]
    })?;

    let mut rounds = Vec::with_capacity(cfg.rounds);
    for t in 1..=cfg.rounds {
        let ledger = compute_burdens(&model, samples, mask, &cfg.recourse, cfg.failure_policy, t)?;
        let round_cfg = TrainConfig {
            epochs: 1,
            seed: round_seed(cfg.train.seed, t),
            ..cfg.train.clone()
        };
        if cfg.reset_optimizer {
            optimizer = None;
        }
        let (losses, mean_weight) = if cfg.per_batch {
            let mut used = 0.0;
            let losses = model.train_with(samples, &round_cfg, &mut optimizer, |batch| {
                let b: Vec<f64> = batch.iter().map(|&r| ledger.burdens[r]).collect();
                let w = phi_weights(&b, cfg.c);
                used += w.iter().sum::<f64>();
                w
            })?;
            (losses, used / samples.len().max(1) as f64)
        } else {
            let w = phi_weights(&ledger.burdens, cfg.c);
            let mean = w.iter().sum::<f64>() / w.len().max(1) as f64;
            let losses = model.train_with(samples, &round_cfg, &mut optimizer, |rows| {
                rows.iter().map(|&r| w[r]).collect()
            })?;
            (losses, mean)
        };
        let log = RoundLog {
            round: t,
            total_burden: ledger.total,
            attempted: ledger.attempted,
            failures: ledger.failures,
            mean_weight,
            loss: losses[0],
        };
        log::info!(
            "round {t}: B = {:.4}, {} of {} recourse failures, mean weight {:.4}, loss {:.6}",
            log.total_burden,
            log.failures,
            log.attempted,
            log.mean_weight,
            log.loss
        );
        rounds.push(log);
    }
    Ok(MisobOutcome {
        model,
        warmup_losses,
        rounds,
    })
}

/// Sum of burdens a model imposes on `x`, `y` (convenience for diagnostics).
pub fn total_burden(
    model: &Model,
    x: ArrayView2<'_, f64>,
    y: &[u8],
    mask: &[bool],
    method: &RecourseMethod,
    policy: FailurePolicy,
) -> Result<f64> {
    Ok(compute_burdens(model, Samples::new(x, y)?, mask, method, policy, 0)?.total)
}
