use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{normalize, AutoencoderModel, Dense, NetworkShape};
use crate::error::{Error, Result};
use crate::geometry::{AnchorLayout, RangeSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rng_seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            learning_rate: 1e-3,
            rng_seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidSpec(
                "epochs and batch_size must be >= 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidSpec("learning rate must be positive".into()));
        }
        if !((0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0)
        {
            return Err(Error::InvalidSpec("invalid Adam moment parameters".into()));
        }
        Ok(())
    }
}

/// Loss after every epoch, evaluated on the full training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
}

/// Parameter gradients, laid out like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    fn zeros_like(model: &AutoencoderModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| Dense::zeros(l.n_in, l.n_out))
                .collect(),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }
}

fn params_mut(model: &mut AutoencoderModel) -> impl Iterator<Item = &mut f64> {
    model
        .layers
        .iter_mut()
        .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
}

fn param_at(model: &mut AutoencoderModel, mut idx: usize) -> &mut f64 {
    for layer in &mut model.layers {
        if idx < layer.weights.len() {
            return &mut layer.weights[idx];
        }
        idx -= layer.weights.len();
        if idx < layer.bias.len() {
            return &mut layer.bias[idx];
        }
        idx -= layer.bias.len();
    }
    panic!("parameter index out of range");
}

/// Uniform weights in `±sqrt(3 / fan_in)` (unit-variance propagation), zero biases.
#[cfg(test)]
pub(crate) fn init_model(
    shape: NetworkShape,
    norm_scale: f64,
    layout: &AnchorLayout,
    seed: u64,
) -> AutoencoderModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_with(shape, norm_scale, layout, &mut rng)
}

fn init_with(
    shape: NetworkShape,
    norm_scale: f64,
    layout: &AnchorLayout,
    rng: &mut ChaCha8Rng,
) -> AutoencoderModel {
    let mut model = AutoencoderModel::zeros(shape, norm_scale, layout.fingerprint());
    for layer in &mut model.layers {
        let bound = (3.0 / layer.n_in as f64).sqrt();
        for w in &mut layer.weights {
            *w = rng.random_range(-bound..bound);
        }
    }
    model
}

/// Activations of one forward pass, pre- and post-nonlinearity.
struct Trace {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

fn forward_trace(model: &AutoencoderModel, x: &[f64]) -> Trace {
    let mut pre = Vec::with_capacity(4);
    let mut post: Vec<Vec<f64>> = Vec::with_capacity(5);
    post.push(x.to_vec());
    for (k, layer) in model.layers.iter().enumerate() {
        let mut z = vec![0.0; layer.n_out];
        layer.apply(post.last().unwrap(), &mut z);
        let a = if k < 3 {
            z.iter().map(|v| v.max(0.0)).collect()
        } else {
            z.iter()
                .map(|&v| if v < 0.0 { v * model.leaky_slope } else { v })
                .collect()
        };
        pre.push(z);
        post.push(a);
    }
    Trace { pre, post }
}

/// Adds the gradient of the per-sample MSE loss, scaled by `weight`, into
/// `grads`; returns the loss.
fn accumulate(model: &AutoencoderModel, x: &[f64], weight: f64, grads: &mut Gradients) -> f64 {
    let trace = forward_trace(model, x);
    let y = &trace.post[4];
    let n = x.len() as f64;
    let loss = y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;

    let mut delta: Vec<f64> = y
        .iter()
        .zip(x)
        .zip(&trace.pre[3])
        .map(|((yi, xi), z)| {
            let slope = if *z < 0.0 { model.leaky_slope } else { 1.0 };
            2.0 * (yi - xi) / n * slope
        })
        .collect();

    for k in (0..4).rev() {
        let layer = &model.layers[k];
        let input = &trace.post[k];
        let g = &mut grads.layers[k];
        for (o, d) in delta.iter().enumerate() {
            let wd = weight * d;
            g.bias[o] += wd;
            let row = &mut g.weights[o * layer.n_in..(o + 1) * layer.n_in];
            for (gw, a) in row.iter_mut().zip(input) {
                *gw += wd * a;
            }
        }
        if k == 0 {
            break;
        }
        let mut back = vec![0.0; layer.n_in];
        for (o, d) in delta.iter().enumerate() {
            let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
            for (b, w) in back.iter_mut().zip(row) {
                *b += w * d;
            }
        }
        for (b, z) in back.iter_mut().zip(&trace.pre[k - 1]) {
            if *z <= 0.0 {
                *b = 0.0;
            }
        }
        delta = back;
    }
    loss
}

/// Mean MSE loss over `batch` and its analytic gradient.
pub fn loss_and_gradients(model: &AutoencoderModel, batch: &[&[f64]]) -> (f64, Gradients) {
    let mut grads = Gradients::zeros_like(model);
    let w = 1.0 / batch.len() as f64;
    let loss = batch
        .iter()
        .map(|x| accumulate(model, x, w, &mut grads))
        .sum::<f64>()
        * w;
    (loss, grads)
}

pub(crate) fn mean_loss(model: &AutoencoderModel, data: &[Vec<f64>]) -> f64 {
    data.iter()
        .map(|x| {
            let y = model.forward(x).expect("validated width");
            y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64
        })
        .sum::<f64>()
        / data.len() as f64
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn update(&mut self, model: &mut AutoencoderModel, grads: &Gradients, cfg: &TrainConfig) {
        self.step += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.step);
        let c2 = 1.0 - cfg.beta2.powi(self.step);
        for (((p, g), m), v) in params_mut(model)
            .zip(grads.values())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            *p -= cfg.learning_rate * (*m / c1) / ((*v / c2).sqrt() + cfg.epsilon);
        }
    }
}

/// Mini-batch Adam on the MSE reconstruction loss of already normalized vectors.
pub(crate) fn fit_vectors(
    data: &[Vec<f64>],
    shape: NetworkShape,
    cfg: &TrainConfig,
    norm_scale: f64,
    layout: &AnchorLayout,
) -> Result<(AutoencoderModel, TrainReport)> {
    shape.validate()?;
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    if let Some(bad) = data.iter().find(|x| x.len() != shape.n_in) {
        return Err(Error::DimensionMismatch {
            expected: shape.n_in,
            got: bad.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut model = init_with(shape, norm_scale, layout, &mut rng);
    let mut adam = Adam::new(shape.parameter_count());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&[f64]> = chunk.iter().map(|&i| data[i].as_slice()).collect();
            let (loss, grads) = loss_and_gradients(&model, &batch);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, loss });
            }
            adam.update(&mut model, &grads, cfg);
        }
        let loss = mean_loss(&model, data);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, loss });
        }
        log::debug!("epoch {epoch}: loss {loss:.6e}");
        epoch_losses.push(loss);
    }
    Ok((model, TrainReport { epoch_losses }))
}

/// Trains on raw range samples; see [`train_with_history`].
pub fn train(
    dataset: &[RangeSample],
    shape: NetworkShape,
    cfg: &TrainConfig,
    norm_scale: f64,
    layout: &AnchorLayout,
) -> Result<AutoencoderModel> {
    train_with_history(dataset, shape, cfg, norm_scale, layout).map(|(m, _)| m)
}

pub fn train_with_history(
    dataset: &[RangeSample],
    shape: NetworkShape,
    cfg: &TrainConfig,
    norm_scale: f64,
    layout: &AnchorLayout,
) -> Result<(AutoencoderModel, TrainReport)> {
    if dataset.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    if !(norm_scale > 0.0) {
        return Err(Error::InvalidSpec("norm_scale must be positive".into()));
    }
    if shape.n_in != layout.len() {
        return Err(Error::DimensionMismatch {
            expected: layout.len(),
            got: shape.n_in,
        });
    }
    let data: Vec<Vec<f64>> = dataset
        .iter()
        .map(|s| normalize(&s.ranges, norm_scale))
        .collect();
    fit_vectors(&data, shape, cfg, norm_scale, layout)
}

const FD_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms.
const GRAD_FLOOR: f64 = 1e-6;

/// Worst relative discrepancy between `analytic` and central finite
/// differences of the single-sample loss.
pub fn compare_gradients(model: &AutoencoderModel, sample: &[f64], analytic: &Gradients) -> f64 {
    let mut probe = model.clone();
    let loss = |m: &AutoencoderModel| {
        let y = m.forward(sample).expect("validated width");
        y.iter()
            .zip(sample)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / sample.len() as f64
    };
    let count = model.shape.parameter_count();
    let mut worst = 0.0_f64;
    for (idx, a) in analytic.values().enumerate().take(count) {
        let orig = *param_at(&mut probe, idx);
        *param_at(&mut probe, idx) = orig + FD_STEP;
        let up = loss(&probe);
        *param_at(&mut probe, idx) = orig - FD_STEP;
        let down = loss(&probe);
        *param_at(&mut probe, idx) = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let diff = (a - numeric).abs();
        if diff == 0.0 {
            continue;
        }
        let scale = a.abs().max(numeric.abs()).max(GRAD_FLOOR);
        worst = worst.max(diff / scale);
    }
    worst
}

/// Analytic backprop versus finite differences for one normalized sample.
pub fn gradient_check(model: &AutoencoderModel, sample: &[f64]) -> f64 {
    let (_, grads) = loss_and_gradients(model, &[sample]);
    compare_gradients(model, sample, &grads)
}
