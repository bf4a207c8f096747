//! Rollout collection and the training loop.

use std::collections::VecDeque;
use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::network::{log_softmax, softmax, ActorCritic, Architecture};
use super::ppo::{ppo_update, Adam, Batch, LossCoefficients, Trajectory, UpdateConfig};
use super::flatten;
use crate::env::{DoneReason, Env, EnvConfig};
use crate::error::{invalid, Result};
use crate::rng::{derive_seed, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub total_steps: usize,
    /// Steps per environment between updates.
    pub rollout_length: usize,
    pub n_envs: usize,
    pub minibatch_size: usize,
    pub epochs_per_update: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub learning_rate: f64,
    /// Decay the learning rate linearly to zero over `total_steps`.
    pub anneal_lr: bool,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    /// Multiplies rewards before advantage estimation; logged returns stay unscaled.
    pub reward_scale: f64,
    pub hidden_dim: usize,
    pub trunk_layers: usize,
    pub seed: u64,
    /// Threads stepping environments. Results do not depend on it.
    pub workers: usize,
    /// Updates between log rows.
    pub log_every: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            total_steps: 1_000_000,
            rollout_length: 256,
            n_envs: 8,
            minibatch_size: 64,
            epochs_per_update: 4,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            learning_rate: 2.5e-4,
            anneal_lr: false,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            reward_scale: 1.0,
            hidden_dim: 128,
            trunk_layers: 2,
            seed: 0,
            workers: 1,
            log_every: 1,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            self.rollout_length,
            self.n_envs,
            self.minibatch_size,
            self.epochs_per_update,
            self.hidden_dim,
            self.workers,
            self.log_every,
        ];
        if counts.contains(&0) {
            return Err(invalid("trainer counts must be at least 1"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(invalid("gamma must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(invalid("gae_lambda must lie in [0, 1]"));
        }
        if ![self.clip_eps, self.learning_rate, self.reward_scale].iter().all(|&v| v > 0.0) {
            return Err(invalid("clip_eps, learning_rate and reward_scale must be positive"));
        }
        Ok(())
    }

    pub fn architecture(&self, env: &EnvConfig) -> Architecture {
        let (h, w, c) = env.observation_shape();
        Architecture {
            obs_dim: h * w * c,
            hidden_dim: self.hidden_dim,
            trunk_layers: self.trunk_layers,
            n_actions: env.num_actions(),
        }
    }

    fn update_config(&self) -> UpdateConfig {
        UpdateConfig {
            epochs: self.epochs_per_update,
            minibatch_size: self.minibatch_size,
            coef: LossCoefficients {
                clip_eps: self.clip_eps,
                value_coef: self.value_coef,
                entropy_coef: self.entropy_coef,
            },
            max_grad_norm: self.max_grad_norm,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingLogRow {
    pub steps: usize,
    pub mean_reward: f64,
    pub success_rate: f64,
    pub entropy: f64,
    pub clip_frac: f64,
}

pub fn write_training_log<W: Write>(out: W, rows: &[TrainingLogRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| crate::error::Error::Csv(e.into()))?;
    Ok(())
}

struct Worker {
    env: Env,
    rng: Rng,
    seed_base: u64,
    episodes: u64,
    obs: Vec<f64>,
    ep_return: f64,
}

struct Finished {
    ret: f64,
    success: bool,
}

impl Worker {
    fn new(config: &EnvConfig, seed: u64, index: usize) -> Result<Self> {
        let seed_base = derive_seed(seed, 1 + index as u64);
        let (env, obs) = Env::reset_with(config.clone(), derive_seed(seed_base, 0))?;
        Ok(Worker {
            env,
            rng: Rng::new(derive_seed(seed_base, u64::MAX)),
            seed_base,
            episodes: 0,
            obs: flatten(&obs),
            ep_return: 0.0,
        })
    }

    /// Samples from `logits`, steps, and records into `traj`.
    fn step(&mut self, logits: &[f64], value: f64, scale: f64, traj: &mut Trajectory) -> Result<Option<Finished>> {
        let action = self.rng.categorical(&softmax(logits));
        let log_prob = log_softmax(logits)[action];
        let result = self.env.step(action)?;
        traj.observations.push(std::mem::take(&mut self.obs));
        traj.actions.push(action);
        traj.log_probs.push(log_prob);
        traj.values.push(value);
        traj.rewards.push(result.reward * scale);
        traj.dones.push(result.done);
        self.ep_return += result.reward;
        if result.done {
            let finished = Finished {
                ret: self.ep_return,
                success: result.info.done_reason == DoneReason::Goal,
            };
            self.episodes += 1;
            self.ep_return = 0.0;
            let obs = self.env.reset(derive_seed(self.seed_base, self.episodes))?;
            self.obs = flatten(&obs);
            Ok(Some(finished))
        } else {
            self.obs = flatten(&result.observation);
            Ok(None)
        }
    }
}

fn stack(workers: &[Worker], obs_dim: usize) -> Array2<f64> {
    let mut x = Array2::zeros((workers.len(), obs_dim));
    for (i, w) in workers.iter().enumerate() {
        x.row_mut(i).assign(&ndarray::ArrayView1::from(w.obs.as_slice()));
    }
    x
}

/// Trains a fresh network on `env_config`. Fully determined by the two configs.
pub fn train(env_config: &EnvConfig, config: &TrainerConfig) -> Result<(ActorCritic, Vec<TrainingLogRow>)> {
    train_with_progress(env_config, config, |_| {})
}

pub fn train_with_progress(
    env_config: &EnvConfig,
    config: &TrainerConfig,
    mut on_log: impl FnMut(&TrainingLogRow),
) -> Result<(ActorCritic, Vec<TrainingLogRow>)> {
    env_config.validate()?;
    config.validate()?;
    let root = Rng::new(config.seed);
    let arch = config.architecture(env_config);
    let mut net = ActorCritic::new(arch, &mut root.child(0));
    let mut log = Vec::new();
    if config.total_steps == 0 {
        return Ok((net, log));
    }

    let mut optimizer = Adam::new(&net, config.learning_rate);
    let mut shuffle_rng = root.child(1);
    let update_cfg = config.update_config();
    let mut workers = (0..config.n_envs)
        .map(|i| Worker::new(env_config, config.seed, i))
        .collect::<Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| invalid(e.to_string()))?;

    let mut recent: VecDeque<Finished> = VecDeque::with_capacity(100);
    let mut steps = 0;
    let mut updates = 0;
    while steps < config.total_steps {
        if config.anneal_lr {
            optimizer.learning_rate = config.learning_rate * (1.0 - steps as f64 / config.total_steps as f64);
        }
        let remaining = config.total_steps - steps;
        let horizon = config.rollout_length.min(remaining.div_ceil(config.n_envs));
        let mut trajs = vec![Trajectory::default(); workers.len()];
        for _ in 0..horizon {
            let out = net.forward_batch(stack(&workers, arch.obs_dim).view())?;
            let finished: Vec<Result<Option<Finished>>> = if config.workers > 1 {
                use rayon::prelude::*;
                pool.install(|| {
                    workers
                        .par_iter_mut()
                        .zip(trajs.par_iter_mut())
                        .enumerate()
                        .map(|(i, (w, t))| w.step(&out.logits.row(i).to_vec(), out.values[i], config.reward_scale, t))
                        .collect()
                })
            } else {
                workers
                    .iter_mut()
                    .zip(trajs.iter_mut())
                    .enumerate()
                    .map(|(i, (w, t))| w.step(&out.logits.row(i).to_vec(), out.values[i], config.reward_scale, t))
                    .collect()
            };
            for f in finished {
                if let Some(f) = f? {
                    if recent.len() == 100 {
                        recent.pop_front();
                    }
                    recent.push_back(f);
                }
            }
        }
        steps += horizon * workers.len();

        let boot = net.forward_batch(stack(&workers, arch.obs_dim).view())?;
        for (t, v) in trajs.iter_mut().zip(boot.values.iter()) {
            t.bootstrap_value = *v;
        }
        let batch = Batch::from_trajectories(&trajs, arch.obs_dim, config.gamma, config.gae_lambda);
        let diag = ppo_update(&mut net, &mut optimizer, &batch, &update_cfg, &mut shuffle_rng)?;
        updates += 1;

        if updates % config.log_every == 0 || steps >= config.total_steps {
            let n = recent.len().max(1) as f64;
            let row = TrainingLogRow {
                steps,
                mean_reward: recent.iter().map(|f| f.ret).sum::<f64>() / n,
                success_rate: recent.iter().filter(|f| f.success).count() as f64 / n,
                entropy: diag.entropy,
                clip_frac: diag.clip_fraction,
            };
            on_log(&row);
            log.push(row);
        }
    }
    Ok((net, log))
}
