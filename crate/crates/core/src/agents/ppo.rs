//! Generalized advantage estimation and the clipped-surrogate update.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::network::{log_softmax, softmax, ActorCritic};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// One environment's rollout segment.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    /// `dones[t]` marks that the episode ended after step `t`.
    pub dones: Vec<bool>,
    /// Value estimate of the state after the last step.
    pub bootstrap_value: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Returns `(advantages, returns)`.
pub fn compute_gae(traj: &Trajectory, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = traj.len();
    let mut adv = vec![0.0; n];
    let mut next_value = traj.bootstrap_value;
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let live = if traj.dones[t] { 0.0 } else { 1.0 };
        let delta = traj.rewards[t] + gamma * next_value * live - traj.values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = traj.values[t];
    }
    let returns = adv.iter().zip(&traj.values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Flattened training batch.
#[derive(Clone, Debug)]
pub struct Batch {
    pub observations: Array2<f64>,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Concatenates trajectories, computing GAE for each.
    pub fn from_trajectories(trajs: &[Trajectory], obs_dim: usize, gamma: f64, lambda: f64) -> Self {
        let n: usize = trajs.iter().map(Trajectory::len).sum();
        let mut observations = Array2::zeros((n, obs_dim));
        let mut batch = Batch {
            observations: Array2::zeros((0, obs_dim)),
            actions: Vec::with_capacity(n),
            old_log_probs: Vec::with_capacity(n),
            advantages: Vec::with_capacity(n),
            returns: Vec::with_capacity(n),
        };
        let mut row = 0;
        for t in trajs {
            let (adv, ret) = compute_gae(t, gamma, lambda);
            for o in &t.observations {
                observations.row_mut(row).assign(&ndarray::ArrayView1::from(o.as_slice()));
                row += 1;
            }
            batch.actions.extend(&t.actions);
            batch.old_log_probs.extend(&t.log_probs);
            batch.advantages.extend(adv);
            batch.returns.extend(ret);
        }
        batch.observations = observations;
        batch
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossCoefficients {
    pub clip_eps: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
}

/// Gradient of one sample's policy terms w.r.t. its logits, plus
/// `(surrogate, ratio, entropy)`.
pub(crate) fn sample_logit_grad(
    logits: &[f64],
    action: usize,
    old_log_prob: f64,
    advantage: f64,
    coef: &LossCoefficients,
) -> (Vec<f64>, f64, f64, f64) {
    let p = softmax(logits);
    let logp = log_softmax(logits);
    let ratio = (logp[action] - old_log_prob).exp();
    let clipped = ratio.clamp(1.0 - coef.clip_eps, 1.0 + coef.clip_eps);
    let unclipped_obj = ratio * advantage;
    let clipped_obj = clipped * advantage;
    let surrogate = unclipped_obj.min(clipped_obj);
    let entropy: f64 = -p.iter().zip(&logp).map(|(a, b)| a * b).sum::<f64>();

    // d(-surrogate)/dr is -A on the unclipped branch, 0 once clipping binds.
    let d_ratio = if unclipped_obj <= clipped_obj { -advantage } else { 0.0 };
    let grad = (0..logits.len())
        .map(|j| {
            let onehot = if j == action { 1.0 } else { 0.0 };
            let d_surr = d_ratio * ratio * (onehot - p[j]);
            let d_ent = coef.entropy_coef * p[j] * (logp[j] + entropy);
            d_surr + d_ent
        })
        .collect();
    (grad, surrogate, ratio, entropy)
}

/// Mean clipped-surrogate loss over `obs` and its parameter gradient:
/// `-min(rA, clip(r)A) + value_coef (V - R)^2 - entropy_coef H`.
#[allow(clippy::too_many_arguments)]
pub fn ppo_loss(
    net: &ActorCritic,
    obs: ArrayView2<f64>,
    actions: &[usize],
    old_log_probs: &[f64],
    advantages: &[f64],
    returns: &[f64],
    coef: &LossCoefficients,
) -> Result<(LossStats, ActorCritic)> {
    let n = actions.len();
    let cache = net.forward_batch(obs)?;
    let mut d_logits = Array2::zeros(cache.logits.raw_dim());
    let mut d_values = Array1::zeros(n);
    let mut stats = LossStats::default();
    let scale = 1.0 / n as f64;
    for i in 0..n {
        let logits = cache.logits.row(i).to_vec();
        let (g, surr, ratio, ent) = sample_logit_grad(&logits, actions[i], old_log_probs[i], advantages[i], coef);
        for (j, v) in g.into_iter().enumerate() {
            d_logits[(i, j)] = v * scale;
        }
        let err = cache.values[i] - returns[i];
        d_values[i] = 2.0 * coef.value_coef * err * scale;

        stats.policy_loss -= surr * scale;
        stats.value_loss += err * err * scale;
        stats.entropy += ent * scale;
        stats.mean_ratio += ratio * scale;
        if (ratio - 1.0).abs() > coef.clip_eps {
            stats.clip_fraction += scale;
        }
    }
    stats.loss = stats.policy_loss + coef.value_coef * stats.value_loss - coef.entropy_coef * stats.entropy;
    let grads = net.backward(&cache, d_logits.view(), &d_values);
    Ok((stats, grads))
}

/// Adam with per-parameter moment estimates.
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: ActorCritic,
    v: ActorCritic,
    t: i32,
}

impl Adam {
    pub fn new(net: &ActorCritic, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-5,
            m: ActorCritic::zeros_like(net.arch),
            v: ActorCritic::zeros_like(net.arch),
            t: 0,
        }
    }

    /// Descends along `grads`.
    pub fn step(&mut self, net: &mut ActorCritic, grads: &ActorCritic) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let lr = self.learning_rate;
        let eps = self.eps;
        for (((p, g), m), v) in net
            .values_mut()
            .zip(grads.values())
            .zip(self.m.values_mut())
            .zip(self.v.values_mut())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateConfig {
    pub epochs: usize,
    pub minibatch_size: usize,
    pub coef: LossCoefficients,
    /// Global gradient-norm ceiling; non-positive disables clipping.
    pub max_grad_norm: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateDiagnostics {
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub entropy: f64,
    pub value_loss: f64,
    pub policy_loss: f64,
    pub minibatches: usize,
}

pub fn normalize_advantages(adv: &mut [f64]) {
    let n = adv.len() as f64;
    if adv.is_empty() {
        return;
    }
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    for a in adv.iter_mut() {
        *a = (*a - mean) / std;
    }
}

/// Runs `epochs` passes of shuffled minibatch updates over `batch`.
///
/// Advantages are normalized once per call. A non-finite loss or gradient
/// aborts the update before the offending step is applied.
pub fn ppo_update(
    net: &mut ActorCritic,
    optimizer: &mut Adam,
    batch: &Batch,
    config: &UpdateConfig,
    rng: &mut Rng,
) -> Result<UpdateDiagnostics> {
    if batch.is_empty() {
        return Err(crate::error::invalid("empty batch"));
    }
    let mut advantages = batch.advantages.clone();
    normalize_advantages(&mut advantages);

    let n = batch.len();
    let mb = config.minibatch_size.clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut diag = UpdateDiagnostics::default();
    for _ in 0..config.epochs {
        for i in (1..n).rev() {
            order.swap(i, rng.below(i + 1));
        }
        for idx in order.chunks(mb) {
            let obs = batch.observations.select(Axis(0), idx);
            let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
            let actions: Vec<usize> = idx.iter().map(|&i| batch.actions[i]).collect();
            let (stats, mut grads) = ppo_loss(
                net,
                obs.view(),
                &actions,
                &pick(&batch.old_log_probs),
                &pick(&advantages),
                &pick(&batch.returns),
                &config.coef,
            )?;
            if !stats.loss.is_finite() || !grads.is_finite() {
                return Err(Error::NonFinite("policy gradient".into()));
            }
            if config.max_grad_norm > 0.0 {
                let norm = grads.values().map(|g| g * g).sum::<f64>().sqrt();
                if norm > config.max_grad_norm {
                    let s = config.max_grad_norm / norm;
                    grads.values_mut().for_each(|g| *g *= s);
                }
            }
            optimizer.step(net, &grads);
            diag.mean_ratio += stats.mean_ratio;
            diag.clip_fraction += stats.clip_fraction;
            diag.entropy += stats.entropy;
            diag.value_loss += stats.value_loss;
            diag.policy_loss += stats.policy_loss;
            diag.minibatches += 1;
        }
    }
    let k = diag.minibatches.max(1) as f64;
    diag.mean_ratio /= k;
    diag.clip_fraction /= k;
    diag.entropy /= k;
    diag.value_loss /= k;
    diag.policy_loss /= k;
    Ok(diag)
}
