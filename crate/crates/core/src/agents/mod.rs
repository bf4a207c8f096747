//! Level-designing agents: a uniform random baseline and an actor-critic
//! network trained with clipped-surrogate policy gradients.

pub mod network;
pub mod ppo;
pub mod random;
pub mod train;

pub use network::{argmax, log_softmax, softmax, ActorCritic, Architecture, PolicyFile};
pub use ppo::{compute_gae, ppo_loss, ppo_update, Adam, Batch, LossCoefficients, Trajectory, UpdateConfig, UpdateDiagnostics};
pub use random::random_policy;
pub use train::{train, write_training_log, TrainerConfig, TrainingLogRow};

use crate::env::EpisodeState;
use crate::error::Result;
use crate::level::OneHot;
use crate::rng::Rng;

/// Chooses actions during evaluation.
pub trait Policy: Send + Sync {
    fn name(&self) -> String;

    fn act(&self, obs: &OneHot, episode: &EpisodeState, rng: &mut Rng) -> Result<usize>;
}

pub fn flatten(obs: &OneHot) -> Vec<f64> {
    obs.data.iter().map(|&v| v as f64).collect()
}

pub struct RandomPolicy {
    pub n_actions: usize,
}

impl Policy for RandomPolicy {
    fn name(&self) -> String {
        "random".into()
    }

    fn act(&self, _obs: &OneHot, _episode: &EpisodeState, rng: &mut Rng) -> Result<usize> {
        random_policy(self.n_actions, rng)
    }
}

/// Network policy; greedy (argmax) unless `sample` is set.
pub struct NetworkPolicy {
    pub label: String,
    pub net: ActorCritic,
    pub sample: bool,
}

impl Policy for NetworkPolicy {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn act(&self, obs: &OneHot, _episode: &EpisodeState, rng: &mut Rng) -> Result<usize> {
        let (logits, _) = self.net.policy_forward(&flatten(obs))?;
        Ok(if self.sample {
            rng.categorical(&softmax(&logits))
        } else {
            argmax(&logits)
        })
    }
}
