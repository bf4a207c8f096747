//! Feed-forward actor-critic over a flattened one-hot observation.
//!
//! Shared trunk of ReLU layers, a linear actor head producing logits and a
//! linear critic head producing one value. Forward and backward passes are
//! written out by hand so gradients can be checked against finite
//! differences.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, io_err, Error, Result};
use crate::problems::ProblemConfig;
use crate::representations::RepKind;
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub obs_dim: usize,
    pub hidden_dim: usize,
    pub trunk_layers: usize,
    pub n_actions: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `fan_in x fan_out`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Dense {
            w: Array2::zeros((fan_in, fan_out)),
            b: Array1::zeros(fan_out),
        }
    }

    fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.w) + &self.b
    }
}

/// Layers in order: trunk layers, actor head, critic head.
#[derive(Clone, Debug, PartialEq)]
pub struct ActorCritic {
    pub arch: Architecture,
    pub layers: Vec<Dense>,
}

/// Intermediate activations kept for the backward pass.
pub struct ForwardCache {
    /// Input followed by each trunk layer's post-ReLU output.
    activations: Vec<Array2<f64>>,
    pub logits: Array2<f64>,
    pub values: Array1<f64>,
}

impl ActorCritic {
    /// Orthogonal init (gain sqrt(2) on the trunk, 1 on the critic) and a zero actor head.
    pub fn new(arch: Architecture, rng: &mut Rng) -> Self {
        let mut layers = Vec::with_capacity(arch.trunk_layers + 2);
        let mut fan_in = arch.obs_dim;
        for _ in 0..arch.trunk_layers {
            layers.push(Dense {
                w: orthogonal(fan_in, arch.hidden_dim, 2f64.sqrt(), rng),
                b: Array1::zeros(arch.hidden_dim),
            });
            fan_in = arch.hidden_dim;
        }
        layers.push(Dense::zeros(fan_in, arch.n_actions));
        layers.push(Dense {
            w: orthogonal(fan_in, 1, 1.0, rng),
            b: Array1::zeros(1),
        });
        ActorCritic { arch, layers }
    }

    /// Same shapes, every entry drawn from `N(0, scale^2)`.
    pub fn random(arch: Architecture, scale: f64, rng: &mut Rng) -> Self {
        let mut net = Self::zeros_like(arch);
        for v in net.values_mut() {
            *v = scale * rng.normal();
        }
        net
    }

    pub fn zeros_like(arch: Architecture) -> Self {
        let mut layers = Vec::with_capacity(arch.trunk_layers + 2);
        let mut fan_in = arch.obs_dim;
        for _ in 0..arch.trunk_layers {
            layers.push(Dense::zeros(fan_in, arch.hidden_dim));
            fan_in = arch.hidden_dim;
        }
        layers.push(Dense::zeros(fan_in, arch.n_actions));
        layers.push(Dense::zeros(fan_in, 1));
        ActorCritic { arch, layers }
    }

    fn trunk(&self) -> &[Dense] {
        &self.layers[..self.arch.trunk_layers]
    }

    fn actor(&self) -> &Dense {
        &self.layers[self.arch.trunk_layers]
    }

    fn critic(&self) -> &Dense {
        &self.layers[self.arch.trunk_layers + 1]
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(l.b.iter()))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    /// Batched forward pass over rows of `x`.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<ForwardCache> {
        if x.ncols() != self.arch.obs_dim {
            return Err(invalid(format!(
                "observation has {} features, network expects {}",
                x.ncols(),
                self.arch.obs_dim
            )));
        }
        let mut activations = Vec::with_capacity(self.arch.trunk_layers + 1);
        activations.push(x.to_owned());
        for layer in self.trunk() {
            let mut z = layer.forward(activations.last().unwrap().view());
            z.mapv_inplace(|v| v.max(0.0));
            activations.push(z);
        }
        let h = activations.last().unwrap().view();
        let logits = self.actor().forward(h);
        let values = self.critic().forward(h).column(0).to_owned();
        Ok(ForwardCache {
            activations,
            logits,
            values,
        })
    }

    /// Logits and value for one flattened observation.
    pub fn policy_forward(&self, obs: &[f64]) -> Result<(Vec<f64>, f64)> {
        let x = ArrayView2::from_shape((1, obs.len()), obs).map_err(|e| invalid(e.to_string()))?;
        let out = self.forward_batch(x)?;
        Ok((out.logits.row(0).to_vec(), out.values[0]))
    }

    /// Parameter gradients given loss gradients w.r.t. logits and values.
    pub fn backward(&self, cache: &ForwardCache, d_logits: ArrayView2<f64>, d_values: &Array1<f64>) -> ActorCritic {
        let mut grads = ActorCritic::zeros_like(self.arch);
        let n_trunk = self.arch.trunk_layers;
        let h = &cache.activations[n_trunk];
        let d_values = d_values.view().insert_axis(Axis(1));

        grads.layers[n_trunk].w = h.t().dot(&d_logits);
        grads.layers[n_trunk].b = d_logits.sum_axis(Axis(0));
        grads.layers[n_trunk + 1].w = h.t().dot(&d_values);
        grads.layers[n_trunk + 1].b = d_values.sum_axis(Axis(0));

        let mut delta = d_logits.dot(&self.actor().w.t()) + d_values.dot(&self.critic().w.t());
        for i in (0..n_trunk).rev() {
            // ReLU derivative from the layer's own output.
            ndarray::Zip::from(&mut delta)
                .and(&cache.activations[i + 1])
                .for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            let input = &cache.activations[i];
            grads.layers[i].w = input.t().dot(&delta);
            grads.layers[i].b = delta.sum_axis(Axis(0));
            if i > 0 {
                delta = delta.dot(&self.layers[i].w.t());
            }
        }
        grads
    }

    pub fn to_file(&self, rep: RepKind, problem: &ProblemConfig) -> PolicyFile {
        PolicyFile {
            arch: self.arch,
            layers: self
                .layers
                .iter()
                .map(|l| LayerDoc {
                    w: l.w.outer_iter().map(|r| r.to_vec()).collect(),
                    b: l.b.to_vec(),
                })
                .collect(),
            rep,
            problem: problem.clone(),
        }
    }
}

/// Orthonormal columns (or rows, when `rows < cols`) scaled by `gain`.
fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut Rng) -> Array2<f64> {
    let transpose = rows < cols;
    let (n, k) = if transpose { (cols, rows) } else { (rows, cols) };
    let mut q = Array2::from_shape_fn((n, k), |_| rng.normal());
    for j in 0..k {
        for p in 0..j {
            let dot = q.column(j).dot(&q.column(p));
            let prev = q.column(p).to_owned();
            q.column_mut(j).scaled_add(-dot, &prev);
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        q.column_mut(j).mapv_inplace(|v| v / norm);
    }
    q.mapv_inplace(|v| v * gain);
    if transpose {
        q.reversed_axes()
    } else {
        q
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&l| (l - m).exp()).sum::<f64>().ln();
    logits.iter().map(|&l| l - lse).collect()
}

/// First index of the largest logit.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerDoc {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

/// On-disk policy: architecture, weights, and the environment it was trained for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub arch: Architecture,
    pub layers: Vec<LayerDoc>,
    pub rep: RepKind,
    pub problem: ProblemConfig,
}

impl PolicyFile {
    pub fn network(&self) -> Result<ActorCritic> {
        let mut net = ActorCritic::zeros_like(self.arch);
        if self.layers.len() != net.layers.len() {
            return Err(invalid(format!(
                "policy has {} layers, architecture needs {}",
                self.layers.len(),
                net.layers.len()
            )));
        }
        for (i, (dst, src)) in net.layers.iter_mut().zip(&self.layers).enumerate() {
            let (rows, cols) = dst.w.dim();
            if src.w.len() != rows || src.w.iter().any(|r| r.len() != cols) || src.b.len() != cols {
                return Err(invalid(format!("layer {i} does not match a {rows}x{cols} shape")));
            }
            for (r, row) in src.w.iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    dst.w[(r, c)] = v;
                }
            }
            dst.b = Array1::from(src.b.clone());
        }
        if !net.is_finite() {
            return Err(Error::NonFinite("policy weights".into()));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Ok(serde_json::from_str(&text)?)
    }
}
