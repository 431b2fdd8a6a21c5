//! Fully connected policy network trained by experience replay.
//!
//! Hidden layers use ReLU and the output layer a sigmoid, so every output is
//! a relaxed offloading probability. Training minimizes the mean
//! (over the batch) binary cross-entropy summed over devices, with Adam.

mod memory;

pub use memory::{ReplayMemory, Sample};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::quantizer::RelaxedAction;
use crate::rng::{stream_rng, Stream};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
const LOG_CLAMP: f64 = 1e-12;

/// Hidden widths of the reference network.
pub const DEFAULT_HIDDEN: [usize; 2] = [120, 80];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    #[default]
    WithReplacement,
    WithoutReplacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Train once every this many frames.
    pub train_interval: u64,
    /// Multiplier applied to channel gains before they enter the network.
    pub input_scale: f64,
    pub memory_size: usize,
    pub learning_rate: f64,
    pub sampling: Sampling,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 128,
            train_interval: 10,
            input_scale: 1e6,
            memory_size: 1024,
            learning_rate: 0.01,
            sampling: Sampling::WithReplacement,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.memory_size == 0 {
            return Err(Error::Config("memory_size must be positive".into()));
        }
        if self.batch_size == 0 || self.batch_size > self.memory_size {
            return Err(Error::Config(format!(
                "batch_size must lie in [1, memory_size={}], got {}",
                self.memory_size, self.batch_size
            )));
        }
        if self.train_interval == 0 {
            return Err(Error::Config("train_interval must be at least 1".into()));
        }
        if !(self.input_scale > 0.0) {
            return Err(Error::Config("input_scale must be positive".into()));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(Error::Config("learning_rate must be non-negative".into()));
        }
        Ok(())
    }
}

/// Weights (row-major, `outputs x inputs`) and biases of one layer. Also used
/// for gradients and Adam moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LayerParams {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        LayerParams {
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first: Vec<LayerParams>,
    pub second: Vec<LayerParams>,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    dims: Vec<usize>,
    layers: Vec<LayerParams>,
    adam: AdamState,
    pub learning_rate: f64,
}

fn zero_layers(dims: &[usize]) -> Vec<LayerParams> {
    dims.windows(2).map(|w| LayerParams::zeros(w[0], w[1])).collect()
}

fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    // Keep the output strictly inside (0, 1).
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

impl PolicyNet {
    /// He-normal weights (`sigma = sqrt(2 / fan_in)`), zero biases, zeroed
    /// Adam state. `dims` lists layer widths from input to output.
    pub fn new(dims: &[usize], seed: u64, learning_rate: f64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Shape(format!("invalid layer dims {dims:?}")));
        }
        let mut rng = stream_rng(seed, Stream::NetInit, 0);
        let mut layers = zero_layers(dims);
        for (layer, w) in layers.iter_mut().zip(dims.windows(2)) {
            let sigma = (2.0 / w[0] as f64).sqrt();
            let normal = Normal::new(0.0, sigma).expect("positive sigma");
            for v in &mut layer.weights {
                *v = normal.sample(&mut rng);
            }
        }
        Ok(PolicyNet {
            dims: dims.to_vec(),
            layers,
            adam: AdamState {
                first: zero_layers(dims),
                second: zero_layers(dims),
                step: 0,
            },
            learning_rate,
        })
    }

    /// `[n, hidden..., n]`
    pub fn for_devices(n: usize, hidden: &[usize], seed: u64, learning_rate: f64) -> Result<Self> {
        let mut dims = vec![n];
        dims.extend_from_slice(hidden);
        dims.push(n);
        Self::new(&dims, seed, learning_rate)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    /// Post-activation values of every layer, `acts[0]` being the input.
    fn activations(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        for (l, layer) in self.layers.iter().enumerate() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let prev = &acts[l];
            let mut out = layer.biases.clone();
            for (o, z) in out.iter_mut().enumerate() {
                let row = &layer.weights[o * n_in..(o + 1) * n_in];
                *z += row.iter().zip(prev).map(|(w, x)| w * x).sum::<f64>();
            }
            if l == last {
                out.iter_mut().for_each(|z| *z = sigmoid(*z));
            } else {
                out.iter_mut().for_each(|z| *z = z.max(0.0));
            }
            debug_assert_eq!(out.len(), n_out);
            acts.push(out);
        }
        acts
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} entries, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Relaxed action for already-scaled gains.
    pub fn forward(&self, input: &[f64]) -> Result<RelaxedAction> {
        self.check_input(input)?;
        let mut acts = self.activations(input);
        RelaxedAction::new(acts.pop().unwrap())
    }

    fn check_batch(&self, batch: &[&Sample]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        for s in batch {
            self.check_input(&s.input)?;
            if s.label.len() != self.output_dim() {
                return Err(Error::Shape(format!(
                    "label has {} entries, network outputs {}",
                    s.label.len(),
                    self.output_dim()
                )));
            }
        }
        Ok(())
    }

    /// Mean cross-entropy (natural log) over the batch, summed over outputs.
    pub fn loss(&self, batch: &[&Sample]) -> Result<f64> {
        self.check_batch(batch)?;
        let total: f64 = batch
            .iter()
            .map(|s| {
                let out = self.activations(&s.input).pop().unwrap();
                cross_entropy(&out, &s.label)
            })
            .sum();
        Ok(total / batch.len() as f64)
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn gradient(&self, batch: &[&Sample]) -> Result<(f64, Vec<LayerParams>)> {
        self.check_batch(batch)?;
        let inv_b = 1.0 / batch.len() as f64;
        let mut grads = zero_layers(&self.dims);
        let mut loss = 0.0;
        let last = self.layers.len() - 1;
        for s in batch {
            let acts = self.activations(&s.input);
            loss += cross_entropy(&acts[last + 1], &s.label);
            // Sigmoid + cross-entropy: dL/dz = p - y.
            let mut delta: Vec<f64> = acts[last + 1]
                .iter()
                .zip(&s.label)
                .map(|(p, y)| (p - y) * inv_b)
                .collect();
            for l in (0..=last).rev() {
                let n_in = self.dims[l];
                let prev = &acts[l];
                let g = &mut grads[l];
                for (o, d) in delta.iter().enumerate() {
                    g.biases[o] += d;
                    let row = &mut g.weights[o * n_in..(o + 1) * n_in];
                    for (gw, x) in row.iter_mut().zip(prev) {
                        *gw += d * x;
                    }
                }
                if l > 0 {
                    let w = &self.layers[l].weights;
                    let mut back = vec![0.0; n_in];
                    for (o, d) in delta.iter().enumerate() {
                        let row = &w[o * n_in..(o + 1) * n_in];
                        for (b, wv) in back.iter_mut().zip(row) {
                            *b += d * wv;
                        }
                    }
                    for (b, a) in back.iter_mut().zip(prev) {
                        if *a <= 0.0 {
                            *b = 0.0;
                        }
                    }
                    delta = back;
                }
            }
        }
        Ok((loss * inv_b, grads))
    }

    /// One bias-corrected Adam update.
    pub fn adam_step(&mut self, grads: &[LayerParams]) {
        self.adam.step += 1;
        let t = self.adam.step as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        let lr = self.learning_rate;
        for l in 0..self.layers.len() {
            let update = |theta: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64]| {
                for i in 0..theta.len() {
                    m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                    v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    theta[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            };
            update(
                &mut self.layers[l].weights,
                &mut self.adam.first[l].weights,
                &mut self.adam.second[l].weights,
                &grads[l].weights,
            );
            update(
                &mut self.layers[l].biases,
                &mut self.adam.first[l].biases,
                &mut self.adam.second[l].biases,
                &grads[l].biases,
            );
        }
    }

    /// All parameters flattened layer by layer (weights then biases).
    pub fn flat_params(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        let total: usize = self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum();
        if flat.len() != total {
            return Err(Error::Shape(format!("expected {total} parameters, got {}", flat.len())));
        }
        let mut it = flat.iter();
        for l in &mut self.layers {
            for v in l.weights.iter_mut().chain(l.biases.iter_mut()) {
                *v = *it.next().unwrap();
            }
        }
        Ok(())
    }

    pub fn to_snapshot(&self) -> PolicySnapshot {
        PolicySnapshot {
            layer_dims: self.dims.clone(),
            weights: self.layers.iter().map(|l| l.weights.clone()).collect(),
            biases: self.layers.iter().map(|l| l.biases.clone()).collect(),
            adam_state: AdamMoments {
                first: self.adam.first.clone(),
                second: self.adam.second.clone(),
            },
            step: self.adam.step,
            learning_rate: self.learning_rate,
        }
    }

    pub fn from_snapshot(s: PolicySnapshot) -> Result<Self> {
        let dims = s.layer_dims;
        if dims.len() < 2 {
            return Err(Error::Shape("snapshot needs at least two layer dims".into()));
        }
        let n_layers = dims.len() - 1;
        if s.weights.len() != n_layers
            || s.biases.len() != n_layers
            || s.adam_state.first.len() != n_layers
            || s.adam_state.second.len() != n_layers
        {
            return Err(Error::Shape("snapshot layer count does not match layer_dims".into()));
        }
        let layers: Vec<LayerParams> = s
            .weights
            .into_iter()
            .zip(s.biases)
            .map(|(weights, biases)| LayerParams { weights, biases })
            .collect();
        for (l, w) in dims.windows(2).enumerate() {
            for set in [&layers[l], &s.adam_state.first[l], &s.adam_state.second[l]] {
                if set.weights.len() != w[0] * w[1] || set.biases.len() != w[1] {
                    return Err(Error::Shape(format!("layer {l} does not match dims {dims:?}")));
                }
            }
        }
        Ok(PolicyNet {
            dims,
            layers,
            adam: AdamState {
                first: s.adam_state.first,
                second: s.adam_state.second,
                step: s.step,
            },
            learning_rate: s.learning_rate,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_snapshot()).map_err(|e| Error::json("policy snapshot", e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let snap: PolicySnapshot =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        Self::from_snapshot(snap)
    }
}

pub fn flatten(layers: &[LayerParams]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
        .collect()
}

fn cross_entropy(out: &[f64], label: &[f64]) -> f64 {
    out.iter()
        .zip(label)
        .map(|(&p, &y)| {
            let p = p.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamMoments {
    pub first: Vec<LayerParams>,
    pub second: Vec<LayerParams>,
}

/// Serialized network: per-layer row-major weights, biases, Adam moments and
/// step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySnapshot {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub adam_state: AdamMoments,
    pub step: u64,
    pub learning_rate: f64,
}

/// Samples a batch from `memory` and applies one Adam step. Returns the loss
/// before the update, or `None` while the memory holds fewer than
/// `batch_size` samples.
pub fn train_step<R: Rng>(
    net: &mut PolicyNet,
    memory: &ReplayMemory,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<Option<f64>> {
    if memory.len() < cfg.batch_size {
        return Ok(None);
    }
    let indices: Vec<usize> = match cfg.sampling {
        Sampling::WithReplacement => (0..cfg.batch_size).map(|_| rng.gen_range(0..memory.len())).collect(),
        Sampling::WithoutReplacement => {
            rand::seq::index::sample(rng, memory.len(), cfg.batch_size).into_vec()
        }
    };
    let batch: Vec<&Sample> = indices.iter().map(|&i| memory.get(i)).collect();
    let (loss, grads) = net.gradient(&batch)?;
    net.adam_step(&grads);
    Ok(Some(loss))
}
