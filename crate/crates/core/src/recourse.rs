//! Counterfactual recourse for negatively classified instances.
//!
//! Two generators sit behind [`RecourseGenerator`]:
//!
//! * Growing Spheres: random search in expanding spherical shells around the
//!   instance, then radius bisection inside the first shell that contains a
//!   positively classified point.
//! * Wachter: gradient descent on `(f(x') - target)^2 + lambda * |x' - x|_1`,
//!   run in lockstep over many instances so the model is evaluated on
//!   matrices rather than single rows.
//!
//! Counterfactuals always stay inside `[0, 1]^d` and never move coordinates
//! outside the mutability mask.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Model;
use crate::rng;

/// Decision threshold used throughout recourse.
pub const THRESHOLD: f64 = 0.5;

/// Scale applied to the evaluation distance.
pub const EVAL_SCALE: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
}

/// Distance used to price a counterfactual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostFunction {
    pub norm: Norm,
    pub scale: f64,
    /// `true` for encoded coordinates a recourse method may change.
    pub mask: Vec<bool>,
}

impl CostFunction {
    /// Scaled l2 distance (x100), the cost used for every reported metric.
    pub fn evaluation(mask: Vec<bool>) -> Self {
        Self {
            norm: Norm::L2,
            scale: EVAL_SCALE,
            mask,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) {
            return Err(Error::Config("cost scale must be > 0".into()));
        }
        Ok(())
    }

    pub fn cost(&self, x: ArrayView1<'_, f64>, cf: ArrayView1<'_, f64>) -> Result<f64> {
        if x.len() != cf.len() || x.len() != self.mask.len() {
            return Err(Error::Dimension {
                expected: self.mask.len(),
                got: if x.len() == self.mask.len() {
                    cf.len()
                } else {
                    x.len()
                },
            });
        }
        let d = match self.norm {
            Norm::L1 => l1(x, cf),
            Norm::L2 => l2(x, cf),
        };
        Ok(self.scale * d)
    }
}

fn l1(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum()
}

fn l2(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// `100 * ||x' - x||_2`.
pub fn eval_cost(x: ArrayView1<'_, f64>, cf: ArrayView1<'_, f64>) -> Result<f64> {
    if x.len() != cf.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: cf.len(),
        });
    }
    Ok(EVAL_SCALE * l2(x, cf))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MethodTag {
    #[serde(rename = "gs")]
    GrowingSpheres,
    #[serde(rename = "wt")]
    Wachter,
}

impl MethodTag {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodTag::GrowingSpheres => "gs",
            MethodTag::Wachter => "wt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecourseResult {
    pub counterfactual: Array1<f64>,
    pub success: bool,
    pub eval_cost: f64,
    pub iterations: usize,
    pub method: MethodTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GsConfig {
    pub samples_per_shell: usize,
    pub initial_radius: f64,
    pub growth: f64,
    pub max_shells: usize,
    pub bisection_steps: usize,
    pub seed: u64,
}

impl Default for GsConfig {
    fn default() -> Self {
        Self {
            samples_per_shell: 200,
            initial_radius: 0.1,
            growth: 2.0,
            max_shells: 20,
            bisection_steps: 10,
            seed: 0,
        }
    }
}

impl GsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_shell == 0 || self.max_shells == 0 {
            return Err(Error::Config(
                "growing spheres needs samples and shells".into(),
            ));
        }
        if !(self.initial_radius > 0.0) || !(self.growth > 1.0) {
            return Err(Error::Config(
                "growing spheres needs initial radius > 0 and growth > 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WtOptimizer {
    /// Adam steps with the configured step size as learning rate.
    #[default]
    Adam,
    /// Plain gradient descent.
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WtConfig {
    pub step_size: f64,
    pub lambda: f64,
    pub max_iterations: usize,
    pub norm: Norm,
    pub clamp: bool,
    /// Probability the squared-error term pulls towards; kept above the
    /// decision threshold so the crossing is not decided by rounding.
    pub target_probability: f64,
    pub optimizer: WtOptimizer,
}

impl Default for WtConfig {
    fn default() -> Self {
        Self {
            step_size: 0.01,
            lambda: 0.01,
            max_iterations: 1000,
            norm: Norm::L1,
            clamp: true,
            target_probability: 0.55,
            optimizer: WtOptimizer::Adam,
        }
    }
}

impl WtConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || !(self.lambda >= 0.0) || self.max_iterations == 0 {
            return Err(Error::Config(
                "wachter needs step size > 0, lambda >= 0 and at least one iteration".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.target_probability) {
            return Err(Error::Config(
                "wachter target probability must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Anything that can propose counterfactuals for a batch of instances.
///
/// `streams[i]` identifies row `i` for seeding; results must depend only on
/// `(model, row, stream)` and not on how rows are batched.
pub trait RecourseGenerator: Sync {
    fn tag(&self) -> MethodTag;

    fn generate(
        &self,
        model: &Model,
        xs: ArrayView2<'_, f64>,
        streams: &[u64],
        mask: &[bool],
    ) -> Result<Vec<RecourseResult>>;
}

/// Serializable choice of recourse method with its configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum RecourseMethod {
    Gs(GsConfig),
    Wt(WtConfig),
}

impl RecourseMethod {
    pub fn validate(&self) -> Result<()> {
        match self {
            RecourseMethod::Gs(c) => c.validate(),
            RecourseMethod::Wt(c) => c.validate(),
        }
    }
}

impl RecourseGenerator for RecourseMethod {
    fn tag(&self) -> MethodTag {
        match self {
            RecourseMethod::Gs(_) => MethodTag::GrowingSpheres,
            RecourseMethod::Wt(_) => MethodTag::Wachter,
        }
    }

    fn generate(
        &self,
        model: &Model,
        xs: ArrayView2<'_, f64>,
        streams: &[u64],
        mask: &[bool],
    ) -> Result<Vec<RecourseResult>> {
        match self {
            RecourseMethod::Gs(cfg) => (0..xs.nrows())
                .into_par_iter()
                .map(|i| {
                    let cfg = GsConfig {
                        seed: rng::derive(cfg.seed, streams[i]),
                        ..cfg.clone()
                    };
                    growing_spheres(model, xs.row(i), &cfg, mask)
                })
                .collect(),
            RecourseMethod::Wt(cfg) => wachter_batch(model, xs, cfg, mask),
        }
    }
}

fn check_inputs(model: &Model, d: usize, mask: &[bool]) -> Result<()> {
    if d != model.input_dim() {
        return Err(Error::Dimension {
            expected: model.input_dim(),
            got: d,
        });
    }
    if mask.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: mask.len(),
        });
    }
    Ok(())
}

fn is_accepted(model: &Model, x: ArrayView1<'_, f64>) -> Result<bool> {
    Ok(model.predict(x, THRESHOLD)? == 1)
}

fn finish(
    model: &Model,
    x: ArrayView1<'_, f64>,
    cf: Array1<f64>,
    iterations: usize,
    method: MethodTag,
) -> Result<RecourseResult> {
    let success = is_accepted(model, cf.view())?;
    Ok(RecourseResult {
        eval_cost: eval_cost(x, cf.view())?,
        counterfactual: cf,
        success,
        iterations,
        method,
    })
}

/// Growing Spheres search around `x`.
///
/// Shell `k` covers radii `[r0 g^(k-1), r0 g^k]` (the first shell is the ball of
/// radius `r0`); points are uniform in the shell's volume within the mutable
/// subspace and then clamped to the unit box. The first shell holding a
/// positive point is narrowed by bisecting its radius interval, keeping the
/// nearest positive point seen. `iterations` counts shells visited.
pub fn growing_spheres(
    model: &Model,
    x: ArrayView1<'_, f64>,
    cfg: &GsConfig,
    mask: &[bool],
) -> Result<RecourseResult> {
    cfg.validate()?;
    check_inputs(model, x.len(), mask)?;
    let tag = MethodTag::GrowingSpheres;
    if is_accepted(model, x)? {
        return finish(model, x, x.to_owned(), 0, tag);
    }
    let mutable: Vec<usize> = (0..x.len()).filter(|&j| mask[j]).collect();
    if mutable.is_empty() {
        return finish(model, x, x.to_owned(), cfg.max_shells, tag);
    }
    let mut rng = rng::stream(cfg.seed, 0x65);
    let mut lo = 0.0;
    let mut hi = cfg.initial_radius;
    for shell in 0..cfg.max_shells {
        if let Some(mut best) = sample_shell(model, x, &mutable, lo, hi, cfg, &mut rng)? {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..cfg.bisection_steps {
                let mid = 0.5 * (a + b);
                match sample_shell(model, x, &mutable, a, mid, cfg, &mut rng)? {
                    Some(found) => {
                        if found.0 < best.0 {
                            best = found;
                        }
                        b = mid;
                    }
                    None => a = mid,
                }
            }
            return finish(model, x, best.1, shell + 1, tag);
        }
        lo = hi;
        hi *= cfg.growth;
    }
    finish(model, x, x.to_owned(), cfg.max_shells, tag)
}

/// Nearest accepted sample (l2 distance, counterfactual) in one shell, if any.
fn sample_shell(
    model: &Model,
    x: ArrayView1<'_, f64>,
    mutable: &[usize],
    lo: f64,
    hi: f64,
    cfg: &GsConfig,
    rng: &mut impl Rng,
) -> Result<Option<(f64, Array1<f64>)>> {
    let n = cfg.samples_per_shell;
    let k = mutable.len() as f64;
    // radius uniform in volume: r = hi * (t + u (1 - t))^(1/k), t = (lo/hi)^k
    let t = (lo / hi).powf(k);
    let mut pts = Array2::zeros((n, x.len()));
    for mut row in pts.axis_iter_mut(Axis(0)) {
        row.assign(&x);
        let dir: Vec<f64> = (0..mutable.len())
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let norm = dir
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
            .max(f64::MIN_POSITIVE);
        let u: f64 = rng.random();
        let r = hi * (t + u * (1.0 - t)).powf(1.0 / k);
        for (&j, v) in mutable.iter().zip(&dir) {
            row[j] = (x[j] + r * v / norm).clamp(0.0, 1.0);
        }
    }
    let probs = model.predict_proba_batch(pts.view())?;
    let mut hits: Vec<(f64, usize)> = probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= THRESHOLD)
        .map(|(i, _)| (l2(x, pts.row(i)), i))
        .collect();
    hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    // batch and single-row evaluation can differ in the last bit
    for (dist, i) in hits {
        if is_accepted(model, pts.row(i))? {
            return Ok(Some((dist, pts.row(i).to_owned())));
        }
    }
    Ok(None)
}

/// Wachter counterfactual for a single instance.
pub fn wachter(
    model: &Model,
    x: ArrayView1<'_, f64>,
    cfg: &WtConfig,
    mask: &[bool],
) -> Result<RecourseResult> {
    let xs = x.insert_axis(Axis(0));
    Ok(wachter_batch(model, xs, cfg, mask)?
        .pop()
        .expect("one row in, one row out"))
}

/// Wachter gradient descent run jointly over the rows of `xs`. Each row has
/// its own optimizer state and stops as soon as it is accepted, so results
/// match per-row runs.
pub fn wachter_batch(
    model: &Model,
    xs: ArrayView2<'_, f64>,
    cfg: &WtConfig,
    mask: &[bool],
) -> Result<Vec<RecourseResult>> {
    cfg.validate()?;
    check_inputs(model, xs.ncols(), mask)?;
    let (n, d) = xs.dim();
    let tag = MethodTag::Wachter;
    let mut current = xs.to_owned();
    let mut m = Array2::<f64>::zeros((n, d));
    let mut v = Array2::<f64>::zeros((n, d));
    let mut iterations = vec![0usize; n];
    let mut done = vec![false; n];
    let mut active: Vec<usize> = (0..n).collect();
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);

    for it in 0..=cfg.max_iterations {
        if active.is_empty() {
            break;
        }
        let batch = current.select(Axis(0), &active);
        let (probs, grads) = model.proba_and_input_gradient_batch(batch.view())?;
        let mut still = Vec::with_capacity(active.len());
        for (k, &row) in active.iter().enumerate() {
            let p = probs[k];
            if p >= THRESHOLD && is_accepted(model, current.row(row))? {
                done[row] = true;
                continue;
            }
            if it == cfg.max_iterations {
                continue;
            }
            let x0 = xs.row(row);
            let dist_grad = |j: usize, c: f64| match cfg.norm {
                Norm::L1 => {
                    let diff = c - x0[j];
                    if diff > 0.0 {
                        1.0
                    } else if diff < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                }
                Norm::L2 => 2.0 * (c - x0[j]),
            };
            let objective = (p - cfg.target_probability).powi(2)
                + cfg.lambda
                    * match cfg.norm {
                        Norm::L1 => l1(x0, current.row(row)),
                        Norm::L2 => l2(x0, current.row(row)).powi(2),
                    };
            if !objective.is_finite() {
                return Err(Error::Diverged(format!(
                    "wachter objective became non-finite at iteration {it}"
                )));
            }
            let outer = 2.0 * (p - cfg.target_probability);
            let t = (iterations[row] + 1) as i32;
            for j in 0..d {
                if !mask[j] {
                    continue;
                }
                let c = current[[row, j]];
                let g = outer * grads[[k, j]] + cfg.lambda * dist_grad(j, c);
                let step = match cfg.optimizer {
                    WtOptimizer::Adam => {
                        let mj = b1 * m[[row, j]] + (1.0 - b1) * g;
                        let vj = b2 * v[[row, j]] + (1.0 - b2) * g * g;
                        m[[row, j]] = mj;
                        v[[row, j]] = vj;
                        let mhat = mj / (1.0 - b1.powi(t));
                        let vhat = vj / (1.0 - b2.powi(t));
                        cfg.step_size * mhat / (vhat.sqrt() + eps)
                    }
                    WtOptimizer::Sgd => cfg.step_size * g,
                };
                let mut next = c - step;
                if cfg.clamp {
                    next = next.clamp(0.0, 1.0);
                }
                current[[row, j]] = next;
            }
            iterations[row] += 1;
            still.push(row);
        }
        active = still;
    }

    (0..n)
        .map(|row| {
            let mut res = finish(
                model,
                xs.row(row),
                current.row(row).to_owned(),
                iterations[row],
                tag,
            )?;
            debug_assert!(!done[row] || res.success);
            if !cfg.clamp {
                // outside the box the point is not a valid counterfactual
                if res.counterfactual.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    res.success = false;
                }
            }
            Ok(res)
        })
        .collect()
}

/// How failed recourse enters population cost vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    /// Largest successful cost in the same population (falls back to
    /// `Diagonal` when nothing succeeded).
    #[default]
    MaxObserved,
    /// Scaled length of the unit-cube diagonal, `scale * sqrt(d)`.
    Diagonal,
    /// Failed rows contribute zero cost; they still count towards the failure rate.
    Ignore,
}

/// Per-row recourse outcome for a whole population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationRecourse {
    /// Evaluation cost per row; 0 for accepted rows.
    pub costs: Vec<f64>,
    /// `true` when the row needed no recourse or recourse succeeded.
    pub success: Vec<bool>,
    /// Rows that were denied and therefore needed recourse.
    pub attempted: usize,
    pub failures: usize,
    pub results: Vec<Option<RecourseResult>>,
}

impl PopulationRecourse {
    pub fn failure_rate(&self) -> f64 {
        if self.attempted == 0 {
            0.0
        } else {
            self.failures as f64 / self.attempted as f64
        }
    }
}

/// Recourse costs for every row of `x` under the model's own decisions.
pub fn recourse_costs_population(
    model: &Model,
    x: ArrayView2<'_, f64>,
    method: &dyn RecourseGenerator,
    cost: &CostFunction,
    policy: FailurePolicy,
) -> Result<PopulationRecourse> {
    let decisions = model.predict_batch(x, THRESHOLD)?;
    recourse_for_decisions(model, x, &decisions, method, cost, policy)
}

/// Recourse costs given externally supplied decisions (e.g. post-processed).
///
/// Accepted rows cost 0. Denied rows the model itself rejects get a
/// counterfactual from `method`. Denied rows the model accepts (a decision
/// flipped downwards after the fact) have no feature change that guarantees
/// acceptance and are counted as failures.
pub fn recourse_for_decisions(
    model: &Model,
    x: ArrayView2<'_, f64>,
    decisions: &[u8],
    method: &dyn RecourseGenerator,
    cost: &CostFunction,
    policy: FailurePolicy,
) -> Result<PopulationRecourse> {
    cost.validate()?;
    let n = x.nrows();
    if decisions.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: decisions.len(),
        });
    }
    let model_preds = model.predict_batch(x, THRESHOLD)?;
    let solvable: Vec<usize> = (0..n)
        .filter(|&i| decisions[i] == 0 && model_preds[i] == 0)
        .collect();
    let mut results: Vec<Option<RecourseResult>> = vec![None; n];
    let streams: Vec<u64> = solvable.iter().map(|&i| i as u64).collect();
    let xs = x.select(Axis(0), &solvable);
    let generated = method.generate(model, xs.view(), &streams, &cost.mask)?;
    for (&row, res) in solvable.iter().zip(generated) {
        results[row] = Some(res);
    }
    assemble(x, decisions, &model_preds, results, cost, policy)
}

impl PopulationRecourse {
    /// Re-price an existing population under different decisions without
    /// re-running the generator. Needs a stored result for every row that is
    /// denied by both `decisions` and `model_preds`.
    pub fn redecide(
        &self,
        x: ArrayView2<'_, f64>,
        model_preds: &[u8],
        decisions: &[u8],
        cost: &CostFunction,
        policy: FailurePolicy,
    ) -> Result<PopulationRecourse> {
        let n = x.nrows();
        if decisions.len() != n || model_preds.len() != n || self.results.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: decisions
                    .len()
                    .min(model_preds.len())
                    .min(self.results.len()),
            });
        }
        let mut results = vec![None; n];
        for i in (0..n).filter(|&i| decisions[i] == 0 && model_preds[i] == 0) {
            results[i] = Some(self.results[i].clone().ok_or_else(|| {
                Error::Invariant(format!("no stored counterfactual for row {i}"))
            })?);
        }
        assemble(x, decisions, model_preds, results, cost, policy)
    }
}

fn assemble(
    x: ArrayView2<'_, f64>,
    decisions: &[u8],
    model_preds: &[u8],
    results: Vec<Option<RecourseResult>>,
    cost: &CostFunction,
    policy: FailurePolicy,
) -> Result<PopulationRecourse> {
    let n = x.nrows();
    let denied: Vec<usize> = (0..n).filter(|&i| decisions[i] == 0).collect();
    let mut costs = vec![0.0; n];
    let mut success = vec![true; n];
    for &row in &denied {
        match &results[row] {
            Some(res) => {
                success[row] = res.success;
                if res.success {
                    costs[row] = cost.cost(x.row(row), res.counterfactual.view())?;
                }
            }
            None => {
                debug_assert_eq!(model_preds[row], 1);
                success[row] = false;
            }
        }
    }

    let failed: Vec<usize> = denied.iter().copied().filter(|&i| !success[i]).collect();
    let penalty = match policy {
        FailurePolicy::Ignore => 0.0,
        FailurePolicy::Diagonal => cost.scale * (x.ncols() as f64).sqrt(),
        FailurePolicy::MaxObserved => denied
            .iter()
            .filter(|&&i| success[i])
            .map(|&i| costs[i])
            .fold(None, |acc: Option<f64>, c| {
                Some(acc.map_or(c, |a| a.max(c)))
            })
            .unwrap_or(cost.scale * (x.ncols() as f64).sqrt()),
    };
    for &row in &failed {
        costs[row] = penalty;
    }
    if !failed.is_empty() {
        log::debug!(
            "recourse failed for {} of {} denied rows; charged {penalty:.3} each ({policy:?})",
            failed.len(),
            denied.len()
        );
    }
    Ok(PopulationRecourse {
        costs,
        success,
        attempted: denied.len(),
        failures: failed.len(),
        results,
    })
}

/// Write one CSV record per attempted row: index, x, x', cost, success,
/// iterations and method.
pub fn write_trace(
    path: impl AsRef<std::path::Path>,
    x: ArrayView2<'_, f64>,
    population: &PopulationRecourse,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "row",
        "x",
        "counterfactual",
        "cost",
        "success",
        "iterations",
        "method",
    ])?;
    let join = |v: ArrayView1<'_, f64>| {
        v.iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    for (row, res) in population.results.iter().enumerate() {
        if let Some(r) = res {
            w.write_record([
                row.to_string(),
                join(x.row(row)),
                join(r.counterfactual.view()),
                population.costs[row].to_string(),
                r.success.to_string(),
                r.iterations.to_string(),
                r.method.as_str().to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Dense, ModelSpec};
    use ndarray::array;

    fn logistic(w: Array1<f64>, b: f64) -> Model {
        let d = w.len();
        Model::from_layers(
            ModelSpec::logistic(),
            vec![Dense {
                weights: w.into_shape_with_order((d, 1)).unwrap(),
                bias: array![b],
            }],
        )
        .unwrap()
    }

    #[test]
    fn eval_cost_examples() {
        let x = array![0.0, 0.0];
        assert_eq!(eval_cost(x.view(), x.view()).unwrap(), 0.0);
        assert_eq!(eval_cost(x.view(), array![1.0, 0.0].view()).unwrap(), 100.0);
        let c = eval_cost(x.view(), array![0.3, 0.4].view()).unwrap();
        assert!((c - 50.0).abs() < 1e-12);
        assert!(eval_cost(x.view(), array![1.0].view()).is_err());
    }

    #[test]
    fn gs_everything_positive_except_x_hits_first_shell() {
        // steep logistic: only a tiny neighbourhood of the origin corner is negative
        let m = logistic(array![1e4, 1e4], -1.0);
        let x = array![0.0, 0.0];
        assert_eq!(m.predict(x.view(), THRESHOLD).unwrap(), 0);
        let r = growing_spheres(&m, x.view(), &GsConfig::default(), &[true, true]).unwrap();
        assert!(r.success);
        assert_eq!(r.iterations, 1);
        assert!(r.eval_cost <= 100.0 * 0.1);
    }

    #[test]
    fn gs_all_negative_fails_after_max_shells() {
        let m = logistic(array![0.0, 0.0], -5.0);
        let cfg = GsConfig {
            samples_per_shell: 20,
            ..GsConfig::default()
        };
        let x = array![0.5, 0.5];
        let r = growing_spheres(&m, x.view(), &cfg, &[true, true]).unwrap();
        assert!(!r.success);
        assert_eq!(r.iterations, cfg.max_shells);
        assert_eq!(r.counterfactual, x);
    }

    #[test]
    fn gs_is_seeded_and_respects_mask() {
        let m = logistic(array![3.0, 1.0, -2.0], -1.5);
        let x = array![0.1, 0.2, 0.3];
        let mask = [true, false, true];
        let cfg = GsConfig {
            seed: 42,
            ..GsConfig::default()
        };
        let a = growing_spheres(&m, x.view(), &cfg, &mask).unwrap();
        let b = growing_spheres(&m, x.view(), &cfg, &mask).unwrap();
        assert_eq!(a, b);
        assert!(a.success);
        assert_eq!(a.counterfactual[1], x[1]);
        assert!(a.counterfactual.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn wachter_near_boundary_is_quick_and_cheap() {
        let w = array![4.0, 4.0];
        // proba(x) = 0.499 at x = (0.5, 0.5)
        let b = (0.499f64 / 0.501).ln() - 4.0;
        let m = logistic(w, b);
        let x = array![0.5, 0.5];
        assert!((m.predict_proba(x.view()).unwrap() - 0.499).abs() < 1e-12);
        let r = wachter(&m, x.view(), &WtConfig::default(), &[true, true]).unwrap();
        assert!(r.success);
        assert!(r.iterations <= 5, "{}", r.iterations);
        assert!(r.eval_cost < 5.0, "{}", r.eval_cost);
    }

    #[test]
    fn wachter_huge_lambda_stays_put() {
        let m = logistic(array![2.0, 2.0], -3.0);
        let x = array![0.2, 0.3];
        let cfg = WtConfig {
            lambda: 1e6,
            max_iterations: 200,
            ..WtConfig::default()
        };
        let r = wachter(&m, x.view(), &cfg, &[true, true]).unwrap();
        assert!(!r.success);
        assert!(l1(x.view(), r.counterfactual.view()) < 0.05);
    }

    #[test]
    fn wachter_batch_equals_single_runs() {
        let m = logistic(array![3.0, -1.0, 2.0], -2.5);
        let xs = array![[0.1, 0.5, 0.2], [0.3, 0.9, 0.1], [0.0, 0.0, 0.4]];
        let mask = [true, true, false];
        let batch = wachter_batch(&m, xs.view(), &WtConfig::default(), &mask).unwrap();
        for (i, r) in batch.iter().enumerate() {
            let single = wachter(&m, xs.row(i), &WtConfig::default(), &mask).unwrap();
            assert_eq!(r, &single);
            assert!(r.success);
            assert_eq!(r.counterfactual[2], xs[[i, 2]]);
        }
    }

    #[test]
    fn population_costs_zero_for_accepted() {
        let m = logistic(array![10.0], -5.0);
        let x = array![[0.9], [0.4], [0.8], [0.1]];
        let method = RecourseMethod::Wt(WtConfig::default());
        let cost = CostFunction::evaluation(vec![true]);
        let pop =
            recourse_costs_population(&m, x.view(), &method, &cost, FailurePolicy::MaxObserved)
                .unwrap();
        assert_eq!(pop.costs[0], 0.0);
        assert_eq!(pop.costs[2], 0.0);
        assert!(pop.costs[1] > 0.0 && pop.costs[3] > pop.costs[1]);
        assert_eq!(pop.attempted, 2);
        assert_eq!(pop.failures, 0);
    }

    #[test]
    fn flipped_down_decisions_are_failures() {
        let m = logistic(array![10.0], -5.0);
        let x = array![[0.9], [0.4]];
        let method = RecourseMethod::Wt(WtConfig::default());
        let cost = CostFunction::evaluation(vec![true]);
        let pop = recourse_for_decisions(
            &m,
            x.view(),
            &[0, 0],
            &method,
            &cost,
            FailurePolicy::MaxObserved,
        )
        .unwrap();
        assert!(!pop.success[0] && pop.success[1]);
        assert_eq!(pop.costs[0], pop.costs[1]);
        let pop = recourse_for_decisions(
            &m,
            x.view(),
            &[0, 0],
            &method,
            &cost,
            FailurePolicy::Diagonal,
        )
        .unwrap();
        assert_eq!(pop.costs[0], 100.0);
    }
}
