//! Actor-critic learner: policy network, advantage estimation, clipped
//! policy updates, parallel rollouts and the outer training loop.

mod gae;
mod policy;
mod rollout;
pub mod train;
mod update;

pub use gae::{compute_gae, normalize_advantages};
pub use policy::{log_softmax, sample_categorical, softmax, Policy, PolicyCache, ACTIONS};
pub use rollout::{collect_rollouts, EpisodeRecord, RolloutBuffer, RolloutContext};
pub use update::{ppo_loss_and_grad, ppo_update, Optimizer, UpdateBatch, UpdateDiagnostics};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            _ => Err(Error::Config(format!("unknown optimizer `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub learning_rate: f64,
    pub clip_range: f64,
    pub discount: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub timesteps_per_update: usize,
    pub inner_epochs: usize,
    pub minibatches: usize,
    pub gae_lambda: f64,
    /// Logical workers. Each owns a fixed rng stream and step quota, so
    /// results do not depend on how many threads execute them.
    pub rollout_workers: usize,
    pub optimizer: OptimizerKind,
    pub hidden: Vec<usize>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            clip_range: 0.10,
            discount: 0.99,
            value_coef: 0.5,
            entropy_coef: 0.01,
            timesteps_per_update: 4000,
            inner_epochs: 4,
            minibatches: 1,
            gae_lambda: 0.95,
            rollout_workers: 12,
            optimizer: OptimizerKind::Adam,
            hidden: vec![256, 128],
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return err("learning_rate must be positive");
        }
        if !(self.clip_range > 0.0 && self.clip_range < 1.0) {
            return err("clip_range must lie in (0, 1)");
        }
        if !(self.discount > 0.0 && self.discount <= 1.0 && self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            return err("discount and gae_lambda must lie in (0, 1]");
        }
        if !(self.value_coef > 0.0 && self.entropy_coef > 0.0) {
            return err("value_coef and entropy_coef must be positive");
        }
        if self.timesteps_per_update == 0 || self.inner_epochs == 0 || self.minibatches == 0 || self.rollout_workers == 0 {
            return err("timesteps_per_update, inner_epochs, minibatches and rollout_workers must be positive");
        }
        if self.minibatches > self.timesteps_per_update {
            return err("more minibatches than timesteps");
        }
        if self.hidden.is_empty() || self.hidden.iter().any(|&h| h == 0) {
            return err("hidden layer sizes must be positive");
        }
        Ok(())
    }
}
