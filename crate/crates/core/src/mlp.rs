//! Feed-forward classifier over SQC vectors.
//!
//! Inputs are z-scored with statistics from the training split, pass through
//! ReLU hidden layers and a softmax output. Training minimizes cross-entropy
//! with Adam on shuffled mini-batches and keeps the snapshot with the lowest
//! validation loss (early stopping).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::constellation::Modulation;
use crate::ofdm::OfdmParams;
use crate::seed::{rng_from_seed, SimRng};
use crate::{Error, Result};

/// Probability floor inside the log of the cross-entropy.
pub const LOG_EPS: f64 = 1e-12;

pub const FEATURE_DIM: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 200,
            patience: 10,
            validation_fraction: 0.2,
            hidden: vec![64, 64],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("train config: {msg}")));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("batch_size, max_epochs and patience must be positive");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)");
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return bad("hidden layer widths must be positive");
        }
        Ok(())
    }
}

/// Dense layer; `weights` is `outputs x inputs`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn random<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = libm::sqrt(6.0 / inputs as f64);
        let mut layer = Layer::zeros(inputs, outputs);
        layer
            .weights
            .iter_mut()
            .for_each(|w| *w = rng.random_range(-limit..limit));
        layer
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.inputs).zip(&self.biases).map(|(row, b)| {
            row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b
        }));
    }

    fn num_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn param_mut(&mut self, i: usize) -> &mut f64 {
        if i < self.weights.len() {
            &mut self.weights[i]
        } else {
            &mut self.biases[i - self.weights.len()]
        }
    }

    fn param(&self, i: usize) -> f64 {
        if i < self.weights.len() {
            self.weights[i]
        } else {
            self.biases[i - self.weights.len()]
        }
    }
}

/// One labeled training row; `class` indexes the model's class list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub features: [f64; FEATURE_DIM],
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub norm_mean: Vec<f64>,
    pub norm_std: Vec<f64>,
    pub classes: Vec<Modulation>,
    /// Outlier threshold the features were extracted with; `None` when the
    /// filter was bypassed.
    pub t_max_used: Option<f64>,
    pub ofdm: OfdmParams,
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = libm::exp(*v - max);
        sum += *v;
    }
    logits.iter_mut().for_each(|v| *v /= sum);
}

fn relu_in_place(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

impl MlpModel {
    /// Model with all weights and biases zero and identity standardization.
    pub fn zeros(dims: &[usize], classes: Vec<Modulation>) -> Self {
        let layers = dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        MlpModel {
            layers,
            norm_mean: vec![0.0; dims[0]],
            norm_std: vec![1.0; dims[0]],
            classes,
            t_max_used: None,
            ofdm: OfdmParams::default(),
        }
    }

    /// Uniform fan-in initialization, zero biases.
    pub fn random<R: Rng + ?Sized>(dims: &[usize], classes: Vec<Modulation>, rng: &mut R) -> Self {
        let mut model = Self::zeros(dims, classes);
        model.layers = dims.windows(2).map(|w| Layer::random(w[0], w[1], rng)).collect();
        model
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = self.layers.iter().map(|l| l.inputs).collect();
        if let Some(last) = self.layers.last() {
            dims.push(last.outputs);
        }
        dims
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::Model(msg));
        if self.layers.is_empty() {
            return bad("no layers".into());
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.biases.len() != l.outputs {
                return bad(format!("layer {i} parameter count does not match its shape"));
            }
        }
        for (i, w) in self.layers.windows(2).enumerate() {
            if w[0].outputs != w[1].inputs {
                return bad(format!("layer {i} outputs {} but layer {} takes {}", w[0].outputs, i + 1, w[1].inputs));
            }
        }
        let inputs = self.layers[0].inputs;
        if self.norm_mean.len() != inputs || self.norm_std.len() != inputs {
            return bad(format!("normalization statistics must have {inputs} entries"));
        }
        if self.norm_std.iter().any(|&s| !(s > 0.0)) {
            return bad("normalization std entries must be positive".into());
        }
        if self.layers.last().map(|l| l.outputs) != Some(self.classes.len()) {
            return bad(format!("output width differs from class count {}", self.classes.len()));
        }
        Ok(())
    }

    fn standardize(&self, features: &[f64]) -> Vec<f64> {
        features
            .iter()
            .zip(self.norm_mean.iter().zip(&self.norm_std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    /// Pre-activations of every layer for one standardized input.
    fn activations(&self, input: Vec<f64>) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.apply(acts.last().expect("input pushed"), &mut out);
            if i < last {
                relu_in_place(&mut out);
            } else {
                softmax_in_place(&mut out);
            }
            acts.push(out);
        }
        acts
    }

    /// Class posteriors for raw (unstandardized) features.
    pub fn forward(&self, features: &[f64]) -> Vec<f64> {
        self.activations(self.standardize(features)).pop().expect("at least one layer")
    }

    /// MAP decision over the posteriors.
    pub fn classify(&self, features: &[f64]) -> (Modulation, Vec<f64>) {
        let posterior = self.forward(features);
        (self.classes[argmax(&posterior)], posterior)
    }

    /// Mean cross-entropy over the batch.
    pub fn loss(&self, batch: &[Sample]) -> f64 {
        let total: f64 = batch
            .iter()
            .map(|s| {
                let p = self.forward(&s.features)[s.class];
                -libm::log(p.max(LOG_EPS))
            })
            .sum();
        total / batch.len() as f64
    }

    /// Loss and analytic parameter gradients (same layout as `layers`).
    pub fn loss_and_gradients(&self, batch: &[Sample]) -> (f64, Vec<Layer>) {
        let mut grads: Vec<Layer> = self.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect();
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for s in batch {
            let acts = self.activations(self.standardize(&s.features));
            let probs = acts.last().expect("output layer");
            loss -= libm::log(probs[s.class].max(LOG_EPS));
            let mut delta: Vec<f64> = probs.clone();
            delta[s.class] -= 1.0;
            delta.iter_mut().for_each(|d| *d *= scale);
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let input = &acts[li];
                let g = &mut grads[li];
                for (o, &d) in delta.iter().enumerate() {
                    g.biases[o] += d;
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    row.iter_mut().zip(input).for_each(|(w, x)| *w += d * x);
                }
                if li > 0 {
                    let mut prev = vec![0.0; layer.inputs];
                    for (o, &d) in delta.iter().enumerate() {
                        let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                        prev.iter_mut().zip(row).for_each(|(p, w)| *p += d * w);
                    }
                    // ReLU derivative: active where the post-activation is positive
                    prev.iter_mut().zip(input).for_each(|(p, a)| {
                        if *a <= 0.0 {
                            *p = 0.0;
                        }
                    });
                    delta = prev;
                }
            }
        }
        (loss * scale, grads)
    }

    pub fn accuracy(&self, rows: &[Sample]) -> f64 {
        let correct = rows
            .iter()
            .filter(|s| argmax(&self.forward(&s.features)) == s.class)
            .count();
        correct as f64 / rows.len().max(1) as f64
    }
}

/// Maximum relative error between analytic gradients and central finite
/// differences over every weight and bias. The relative error of one entry
/// is `|a - n| / max(|a|, |n|, 1e-6)`: entries whose gradient is below the
/// floor are compared absolutely.
pub fn gradient_check(model: &MlpModel, batch: &[Sample], step: f64) -> f64 {
    let (_, grads) = model.loss_and_gradients(batch);
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for li in 0..model.layers.len() {
        for pi in 0..model.layers[li].num_params() {
            let orig = model.layers[li].param(pi);
            *probe.layers[li].param_mut(pi) = orig + step;
            let up = probe.loss(batch);
            *probe.layers[li].param_mut(pi) = orig - step;
            let down = probe.loss(batch);
            *probe.layers[li].param_mut(pi) = orig;
            let numeric = (up - down) / (2.0 * step);
            let analytic = grads[li].param(pi);
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch (1-based) whose snapshot was returned.
    pub best_epoch: usize,
    pub train_rows: usize,
    pub val_rows: usize,
}

struct Adam {
    m: Vec<Layer>,
    v: Vec<Layer>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(model: &MlpModel, lr: f64) -> Self {
        let zeros = || model.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect();
        Adam { m: zeros(), v: zeros(), t: 0, lr }
    }

    fn step(&mut self, model: &mut MlpModel, grads: &[Layer]) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(Self::BETA1, self.t as f64);
        let c2 = 1.0 - libm::pow(Self::BETA2, self.t as f64);
        for (li, g) in grads.iter().enumerate() {
            for pi in 0..g.num_params() {
                let grad = g.param(pi);
                let m = self.m[li].param_mut(pi);
                *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * grad;
                let m_hat = *m / c1;
                let v = self.v[li].param_mut(pi);
                *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * grad * grad;
                let v_hat = *v / c2;
                *model.layers[li].param_mut(pi) -= self.lr * m_hat / (libm::sqrt(v_hat) + Self::EPS);
            }
        }
    }
}

/// Splits rows per class, shuffled, sending `fraction` of each class to the
/// validation side (at least one row per class).
fn stratified_split(rows: &[Sample], k: usize, fraction: f64, rng: &mut SimRng) -> (Vec<Sample>, Vec<Sample>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in 0..k {
        let mut members: Vec<Sample> = rows.iter().filter(|s| s.class == class).copied().collect();
        if members.is_empty() {
            continue;
        }
        members.shuffle(rng);
        let n_val = ((members.len() as f64 * fraction) as usize).clamp(1, members.len().saturating_sub(1).max(1));
        val.extend_from_slice(&members[..n_val]);
        train.extend_from_slice(&members[n_val..]);
    }
    (train, val)
}

fn feature_stats(rows: &[Sample]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; FEATURE_DIM];
    for s in rows {
        mean.iter_mut().zip(&s.features).for_each(|(m, x)| *m += x / n);
    }
    let mut var = vec![0.0; FEATURE_DIM];
    for s in rows {
        var.iter_mut()
            .zip(s.features.iter().zip(&mean))
            .for_each(|(v, (x, m))| *v += (x - m) * (x - m) / n);
    }
    let std = var
        .into_iter()
        .map(|v| {
            let s = libm::sqrt(v);
            if s > 1e-12 && s.is_finite() {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

/// Trains a classifier over `classes` from labeled rows.
///
/// The returned model has identity `t_max_used`/`ofdm` metadata left at
/// defaults; callers stamp the feature settings they used.
pub fn train(rows: &[Sample], classes: Vec<Modulation>, cfg: &TrainConfig) -> Result<(MlpModel, TrainingLog)> {
    cfg.validate()?;
    let k = classes.len();
    if rows.iter().any(|s| s.class >= k) {
        return Err(Error::Dataset("row class index outside the class list".into()));
    }
    let mut present = vec![false; k];
    rows.iter().for_each(|s| present[s.class] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::Dataset("at least two classes are required".into()));
    }
    if rows.len() < 10 * cfg.batch_size {
        return Err(Error::Dataset(format!(
            "{} rows is fewer than 10 batches of {}",
            rows.len(),
            cfg.batch_size
        )));
    }
    if rows.iter().any(|s| s.features.iter().any(|x| !x.is_finite())) {
        return Err(Error::Dataset("non-finite feature values".into()));
    }

    let mut rng = rng_from_seed(cfg.seed);
    let (mut train_rows, val_rows) = stratified_split(rows, k, cfg.validation_fraction, &mut rng);

    let mut dims = vec![FEATURE_DIM];
    dims.extend_from_slice(&cfg.hidden);
    dims.push(k);
    let mut model = MlpModel::random(&dims, classes, &mut rng);
    let (mean, std) = feature_stats(&train_rows);
    model.norm_mean = mean;
    model.norm_std = std;

    let mut adam = Adam::new(&model, cfg.learning_rate);
    let mut best = model.clone();
    let mut best_loss = model.loss(&val_rows);
    let mut log = TrainingLog {
        train_rows: train_rows.len(),
        val_rows: val_rows.len(),
        ..TrainingLog::default()
    };
    let mut stale = 0;
    for epoch in 1..=cfg.max_epochs {
        train_rows.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in train_rows.chunks(cfg.batch_size) {
            let (loss, grads) = model.loss_and_gradients(batch);
            epoch_loss += loss * batch.len() as f64;
            adam.step(&mut model, &grads);
        }
        let val_loss = model.loss(&val_rows);
        log.epochs.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / train_rows.len() as f64,
            val_loss,
            val_accuracy: model.accuracy(&val_rows),
        });
        if val_loss < best_loss {
            best_loss = val_loss;
            best = model.clone();
            log.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    Ok((best, log))
}
