//! Binary classifiers: logistic regression and a ReLU multilayer perceptron.
//!
//! Both kinds are a stack of dense layers ending in a single logit followed by
//! a sigmoid. Training minimizes the per-sample weighted binary cross-entropy
//! with minibatch Adam. Exact input gradients of the output probability are
//! exposed for gradient-based recourse.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Samples;
use crate::error::{Error, Result};
use crate::rng;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Rows per chunk when predicting on large matrices.
const PREDICT_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Logistic,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation. ReLU uses 0 at the kink.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

fn default_hidden() -> Vec<usize> {
    vec![128, 128]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self::mlp(default_hidden())
    }
}

impl ModelSpec {
    pub fn logistic() -> Self {
        Self {
            kind: ModelKind::Logistic,
            hidden: Vec::new(),
            activation: Activation::Relu,
        }
    }

    pub fn mlp(hidden: Vec<usize>) -> Self {
        Self {
            kind: ModelKind::Mlp,
            hidden,
            activation: Activation::Relu,
        }
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn hidden_layers(&self) -> &[usize] {
        match self.kind {
            ModelKind::Logistic => &[],
            ModelKind::Mlp => &self.hidden,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == ModelKind::Mlp && self.hidden.is_empty() {
            return Err(Error::Config(
                "an mlp needs at least one hidden layer".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Dense layer computing `x · weights + bias`; `weights` is `inputs × outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros_like(&self) -> Self {
        Self {
            weights: Array2::zeros(self.weights.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    input_dim: usize,
    seed: u64,
    layers: Vec<Dense>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy on a logit, computed without forming the probability.
fn bce_from_logit(z: f64, y: u8) -> f64 {
    let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
    softplus - f64::from(y) * z
}

/// Activations kept from a forward pass.
struct Trace {
    /// inputs[l] is the input of layer l (inputs[0] = x).
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of each hidden layer.
    pre: Vec<Array2<f64>>,
    logits: Array1<f64>,
}

impl Model {
    /// Fresh model. Weights are drawn uniformly from `±1/sqrt(fan_in)`, biases are zero.
    pub fn new(spec: ModelSpec, input_dim: usize, seed: u64) -> Result<Self> {
        spec.validate()?;
        if input_dim == 0 {
            return Err(Error::Config("input dimension must be at least 1".into()));
        }
        let mut rng = rng::stream(seed, 0x1417);
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(spec.hidden_layers());
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                Dense {
                    weights: Array2::from_shape_simple_fn((w[0], w[1]), || {
                        rng.random_range(-bound..bound)
                    }),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Ok(Self {
            spec,
            input_dim,
            seed,
            layers,
        })
    }

    /// Build a model from explicit layers (first layer input width = `input_dim`).
    pub fn from_layers(spec: ModelSpec, layers: Vec<Dense>) -> Result<Self> {
        spec.validate()?;
        let expected = spec.hidden_layers().len() + 1;
        if layers.len() != expected {
            return Err(Error::Config(format!(
                "{:?} model needs {expected} layers, got {}",
                spec.kind,
                layers.len()
            )));
        }
        let input_dim = layers[0].weights.nrows();
        let mut width = input_dim;
        for (i, l) in layers.iter().enumerate() {
            let out = spec.hidden_layers().get(i).copied().unwrap_or(1);
            if l.weights.nrows() != width || l.weights.ncols() != out || l.bias.len() != out {
                return Err(Error::Config(format!("layer {i} has inconsistent shape")));
            }
            width = out;
        }
        let model = Self {
            spec,
            input_dim,
            seed: 0,
            layers,
        };
        model.check_finite()?;
        Ok(model)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// All parameters, layer by layer, weights (row-major) before bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Dimension {
                expected: self.parameter_count(),
                got: params.len(),
            });
        }
        let mut it = params.iter();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = *it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = *it.next().unwrap());
        }
        Ok(())
    }

    fn check_finite(&self) -> Result<()> {
        let finite = self
            .layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()));
        if finite {
            Ok(())
        } else {
            Err(Error::Diverged("model has non-finite parameters".into()))
        }
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got == self.input_dim {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: self.input_dim,
                got,
            })
        }
    }

    fn trace(&self, x: ArrayView2<'_, f64>) -> Trace {
        let act = self.spec.activation;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len() - 1);
        let mut a = x.to_owned();
        let (last, hidden) = self.layers.split_last().expect("at least one layer");
        for l in hidden {
            let z = a.dot(&l.weights) + &l.bias;
            let next = z.mapv(|v| act.apply(v));
            inputs.push(a);
            pre.push(z);
            a = next;
        }
        let logits = a.dot(&last.weights).column(0).to_owned() + last.bias[0];
        inputs.push(a);
        Trace {
            inputs,
            pre,
            logits,
        }
    }

    fn logits_unchecked(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        let act = self.spec.activation;
        let mut a = x.to_owned();
        let (last, hidden) = self.layers.split_last().expect("at least one layer");
        for l in hidden {
            a = a.dot(&l.weights) + &l.bias;
            a.mapv_inplace(|v| act.apply(v));
        }
        a.dot(&last.weights).column(0).to_owned() + last.bias[0]
    }

    /// Final pre-activation for every row.
    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.check_dim(x.ncols())?;
        let mut out = Array1::zeros(x.nrows());
        for (i, chunk) in x.axis_chunks_iter(Axis(0), PREDICT_CHUNK).enumerate() {
            let start = i * PREDICT_CHUNK;
            out.slice_mut(ndarray::s![start..start + chunk.nrows()])
                .assign(&self.logits_unchecked(chunk));
        }
        Ok(out)
    }

    pub fn predict_proba(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        self.check_dim(x.len())?;
        let row = x.insert_axis(Axis(0));
        Ok(sigmoid(self.logits_unchecked(row)[0]))
    }

    pub fn predict_proba_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        Ok(self.logits(x)?.mapv(sigmoid))
    }

    /// 1 iff the probability is at least `threshold` (so 0.5 maps to 1 at the default).
    pub fn predict(&self, x: ArrayView1<'_, f64>, threshold: f64) -> Result<u8> {
        Ok(u8::from(self.predict_proba(x)? >= threshold))
    }

    pub fn predict_batch(&self, x: ArrayView2<'_, f64>, threshold: f64) -> Result<Vec<u8>> {
        Ok(self
            .predict_proba_batch(x)?
            .iter()
            .map(|&p| u8::from(p >= threshold))
            .collect())
    }

    /// Backpropagate `dlogits` (one value per row) through a trace. Returns the
    /// parameter gradients and, when asked, the gradient w.r.t. the input rows.
    fn backward(
        &self,
        trace: &Trace,
        dlogits: ArrayView1<'_, f64>,
        want_input: bool,
    ) -> (Vec<Dense>, Option<Array2<f64>>) {
        let act = self.spec.activation;
        let n_layers = self.layers.len();
        let mut grads: Vec<Dense> = self.layers.iter().map(Dense::zeros_like).collect();
        let mut delta = dlogits.to_owned().insert_axis(Axis(1));
        for l in (0..n_layers).rev() {
            let input = &trace.inputs[l];
            grads[l].weights = input.t().dot(&delta);
            grads[l].bias = delta.sum_axis(Axis(0));
            if l == 0 && !want_input {
                break;
            }
            let mut back = delta.dot(&self.layers[l].weights.t());
            if l > 0 {
                Zip::from(&mut back)
                    .and(&trace.pre[l - 1])
                    .for_each(|b, &z| *b *= act.derivative(z));
            }
            delta = back;
        }
        let input_grad = want_input.then_some(delta);
        (grads, input_grad)
    }

    /// Gradient of `predict_proba` with respect to the input.
    pub fn input_gradient(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        Ok(self.proba_and_input_gradient(x)?.1)
    }

    /// Probability and its input gradient from a single forward/backward pass.
    pub fn proba_and_input_gradient(&self, x: ArrayView1<'_, f64>) -> Result<(f64, Array1<f64>)> {
        self.check_dim(x.len())?;
        let trace = self.trace(x.insert_axis(Axis(0)));
        let p = sigmoid(trace.logits[0]);
        let seed = Array1::from_elem(1, p * (1.0 - p));
        let (_, g) = self.backward(&trace, seed.view(), true);
        Ok((p, g.expect("input gradient requested").row(0).to_owned()))
    }

    /// Row-wise probabilities and input gradients for a batch of inputs.
    pub fn proba_and_input_gradient_batch(
        &self,
        x: ArrayView2<'_, f64>,
    ) -> Result<(Array1<f64>, Array2<f64>)> {
        self.check_dim(x.ncols())?;
        let trace = self.trace(x);
        let p = trace.logits.mapv(sigmoid);
        let seed = p.mapv(|p| p * (1.0 - p));
        let (_, g) = self.backward(&trace, seed.view(), true);
        Ok((p, g.expect("input gradient requested")))
    }

    /// Mean weighted BCE over `rows` and its gradient w.r.t. every parameter,
    /// flattened in [`Model::parameters`] order.
    pub fn weighted_loss_gradient(
        &self,
        samples: Samples<'_>,
        weights: &[f64],
        rows: &[usize],
    ) -> Result<(f64, Vec<f64>)> {
        self.check_dim(samples.dim())?;
        let x = samples.x.select(Axis(0), rows);
        let y: Vec<u8> = rows.iter().map(|&r| samples.y[r]).collect();
        let w: Vec<f64> = rows.iter().map(|&r| weights[r]).collect();
        let (loss, grads) = self.batch_step(x.view(), &y, &w);
        let mut flat = Vec::with_capacity(self.parameter_count());
        for g in &grads {
            flat.extend(g.weights.iter());
            flat.extend(g.bias.iter());
        }
        Ok((loss, flat))
    }

    /// Loss (mean of weighted per-sample BCE) and parameter gradients on one batch.
    fn batch_step(&self, x: ArrayView2<'_, f64>, y: &[u8], w: &[f64]) -> (f64, Vec<Dense>) {
        let n = y.len() as f64;
        let trace = self.trace(x);
        let mut loss = 0.0;
        let mut dlogits = Array1::zeros(y.len());
        for (i, &z) in trace.logits.iter().enumerate() {
            loss += w[i] * bce_from_logit(z, y[i]);
            dlogits[i] = w[i] * (sigmoid(z) - f64::from(y[i])) / n;
        }
        let (grads, _) = self.backward(&trace, dlogits.view(), false);
        (loss / n, grads)
    }

    /// Minibatch Adam on the weighted BCE. Returns the mean weighted loss of
    /// every epoch.
    pub fn train_weighted(
        &mut self,
        samples: Samples<'_>,
        weights: &[f64],
        cfg: &TrainConfig,
    ) -> Result<Vec<f64>> {
        if weights.len() != samples.len() {
            return Err(Error::Dimension {
                expected: samples.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Config(
                "sample weights must be finite and >= 0".into(),
            ));
        }
        self.train_with(samples, cfg, &mut None, |rows| {
            rows.iter().map(|&r| weights[r]).collect()
        })
    }

    /// Training loop with weights supplied per minibatch. A fresh optimizer is
    /// created when `optimizer` is `None`; the state is left in it afterwards.
    pub(crate) fn train_with<F>(
        &mut self,
        samples: Samples<'_>,
        cfg: &TrainConfig,
        optimizer: &mut Option<Adam>,
        mut batch_weights: F,
    ) -> Result<Vec<f64>>
    where
        F: FnMut(&[usize]) -> Vec<f64>,
    {
        cfg.validate()?;
        self.check_dim(samples.dim())?;
        let n = samples.len();
        let adam = optimizer.get_or_insert_with(|| Adam::new(self, cfg));
        let mut order: Vec<usize> = (0..n).collect();
        let mut history = Vec::with_capacity(cfg.epochs);
        for epoch in 0..cfg.epochs {
            order.sort_unstable();
            order.shuffle(&mut rng::stream(rng::derive(cfg.seed, epoch as u64), 0x7a1));
            let mut total = 0.0;
            for batch in order.chunks(cfg.batch_size) {
                let x = samples.x.select(Axis(0), batch);
                let y: Vec<u8> = batch.iter().map(|&r| samples.y[r]).collect();
                let w = batch_weights(batch);
                let (loss, grads) = self.batch_step(x.view(), &y, &w);
                if !loss.is_finite() {
                    return Err(Error::Diverged(format!(
                        "non-finite loss in epoch {epoch}; try a smaller learning rate than {}",
                        cfg.learning_rate
                    )));
                }
                total += loss * batch.len() as f64;
                adam.step(self, &grads);
            }
            let mean = if n == 0 { 0.0 } else { total / n as f64 };
            log::debug!("epoch {epoch}: weighted loss {mean:.6}");
            history.push(mean);
        }
        self.check_finite()?;
        if let Some(last) = history.last() {
            log::info!(
                "trained {} epochs, final weighted loss {last:.6}",
                cfg.epochs
            );
        }
        Ok(history)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.into_model()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn default_lr() -> f64 {
    1e-3
}
fn default_batch() -> usize {
    256
}
fn default_epochs() -> usize {
    6
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: default_lr(),
            batch_size: default_batch(),
            epochs: default_epochs(),
            seed: 0,
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_eps(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("adam decay rates must lie in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("adam epsilon must be > 0".into()));
        }
        Ok(())
    }
}

pub(crate) struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<Dense>,
    v: Vec<Dense>,
}

impl Adam {
    fn new(model: &Model, cfg: &TrainConfig) -> Self {
        let zeros: Vec<Dense> = model.layers.iter().map(Dense::zeros_like).collect();
        Self {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.epsilon,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    fn step(&mut self, model: &mut Model, grads: &[Dense]) {
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let lr = self.lr;
        for (((layer, g), m), v) in model
            .layers
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            let update = |p: &mut f64, g: &f64, m: &mut f64, v: &mut f64| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            };
            Zip::from(&mut layer.weights)
                .and(&g.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .for_each(update);
            Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(update);
        }
    }
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    spec: ModelSpec,
    input_dim: usize,
    seed: u64,
    layers: Vec<LayerFile>,
}

impl From<&Model> for ModelFile {
    fn from(m: &Model) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            spec: m.spec.clone(),
            input_dim: m.input_dim,
            seed: m.seed,
            layers: m
                .layers
                .iter()
                .map(|l| LayerFile {
                    inputs: l.weights.nrows(),
                    outputs: l.weights.ncols(),
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        }
    }
}

impl ModelFile {
    fn into_model(self) -> Result<Model> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        let layers = self
            .layers
            .into_iter()
            .map(|l| {
                let weights = Array2::from_shape_vec((l.inputs, l.outputs), l.weights)
                    .map_err(|e| Error::Config(format!("bad layer shape: {e}")))?;
                Ok(Dense {
                    weights,
                    bias: Array1::from(l.bias),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut model = Model::from_layers(self.spec, layers)?;
        if model.input_dim != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                got: model.input_dim,
            });
        }
        model.seed = self.seed;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
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
    fn init_is_deterministic_and_sized() {
        let a = Model::new(ModelSpec::logistic(), 5, 3).unwrap();
        let b = Model::new(ModelSpec::logistic(), 5, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.parameter_count(), 6);
        assert!(a.layers[0].bias.iter().all(|&v| v == 0.0));
        let w = 37;
        let m = Model::new(ModelSpec::default(), w, 1).unwrap();
        assert_eq!(
            m.parameter_count(),
            w * 128 + 128 + 128 * 128 + 128 + 128 + 1
        );
        assert_ne!(m, Model::new(ModelSpec::default(), w, 2).unwrap());
    }

    #[test]
    fn zero_logistic_is_one_half_with_zero_gradient() {
        let m = logistic(Array1::zeros(3), 0.0);
        let x = array![0.3, 0.9, 0.1];
        assert_eq!(m.predict_proba(x.view()).unwrap(), 0.5);
        assert_eq!(m.input_gradient(x.view()).unwrap(), Array1::<f64>::zeros(3));
        let m = logistic(array![1.0, 0.0, 0.0], 0.0);
        assert_eq!(m.predict_proba(Array1::zeros(3).view()).unwrap(), 0.5);
    }

    #[test]
    fn logistic_gradient_closed_form() {
        let w = array![0.7, -1.2, 2.0];
        let m = logistic(w.clone(), 0.1);
        let x = array![0.2, 0.5, 0.4];
        let p = m.predict_proba(x.view()).unwrap();
        let g = m.input_gradient(x.view()).unwrap();
        for j in 0..3 {
            assert!((g[j] - p * (1.0 - p) * w[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_computed_two_two_one_mlp() {
        let m = Model::from_layers(
            ModelSpec::mlp(vec![2]),
            vec![
                Dense {
                    weights: array![[1.0, -1.0], [0.5, 2.0]],
                    bias: array![0.0, 0.5],
                },
                Dense {
                    weights: array![[1.5], [-0.5]],
                    bias: array![0.25],
                },
            ],
        )
        .unwrap();
        // x = (1, 2): h = relu([1 + 1, -1 + 4 + 0.5]) = [2, 3.5]
        // z = 2 * 1.5 - 3.5 * 0.5 + 0.25 = 1.5
        let p = m.predict_proba(array![1.0, 2.0].view()).unwrap();
        assert!((p - 1.0 / (1.0 + (-1.5f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn threshold_conventions() {
        let m = logistic(Array1::zeros(2), 0.0);
        let x = array![0.1, 0.2];
        assert_eq!(m.predict(x.view(), 0.5).unwrap(), 1);
        let m = logistic(Array1::zeros(2), (0.49f64 / 0.51).ln());
        assert_eq!(m.predict(x.view(), 0.5).unwrap(), 0);
        let m = logistic(array![-50.0, -50.0], -50.0);
        assert_eq!(m.predict(x.view(), 0.0).unwrap(), 1);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = Model::new(ModelSpec::logistic(), 3, 0).unwrap();
        assert!(matches!(
            m.predict_proba(array![1.0].view()),
            Err(Error::Dimension {
                expected: 3,
                got: 1
            })
        ));
        assert!(m.input_gradient(array![1.0, 2.0].view()).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let m = Model::new(ModelSpec::mlp(vec![4, 3]), 5, 11).unwrap();
        let text = m.to_json().unwrap();
        assert!(text.contains("\"format_version\": 1"));
        assert_eq!(Model::from_json(&text).unwrap(), m);
    }

    #[test]
    fn invalid_specs_and_configs() {
        assert!(Model::new(ModelSpec::mlp(vec![]), 3, 0).is_err());
        assert!(Model::new(ModelSpec::mlp(vec![4, 0]), 3, 0).is_err());
        assert!(Model::new(ModelSpec::logistic(), 0, 0).is_err());
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn diverging_training_is_reported() {
        let x = Array2::from_shape_fn((8, 2), |(i, j)| ((i + j) % 2) as f64);
        let y: Vec<u8> = (0..8).map(|i| (i % 2) as u8).collect();
        let mut m = Model::new(ModelSpec::logistic(), 2, 0).unwrap();
        let w = vec![f64::MAX; 8];
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let err = m
            .train_weighted(Samples::new(x.view(), &y).unwrap(), &w, &cfg)
            .unwrap_err();
        assert!(matches!(err, Error::Diverged(_)), "{err}");
    }
}
