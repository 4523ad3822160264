use rayon::prelude::*;

use super::policy::Policy;
use super::update::UpdateBatch;
use super::{compute_gae, PpoConfig};
use crate::curriculum::{serve_task, CurriculumConfig, ServedTask, TaskSource};
use crate::env::{run_episode_recorded, RewardConfig, TerminalCause, OBS_DIM};
use crate::error::Result;
use crate::predictor::{DifficultyStats, Predictor};
use crate::seeding::{stream_rng, Stream};
use crate::world::{Scene, TaskConstraints};

/// Everything a worker needs besides the policy. All borrowed immutably.
pub struct RolloutContext<'a> {
    pub scenes: &'a [Scene],
    pub constraints: &'a TaskConstraints,
    pub reward: &'a RewardConfig,
    pub curriculum: &'a CurriculumConfig,
    pub predictor: &'a Predictor,
    pub stats: &'a DifficultyStats,
    pub global_seed: u64,
    pub epoch: u64,
    /// Environment steps taken before this rollout; drives the schedule.
    pub timestep: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub served: ServedTask,
    pub worker: usize,
    pub success: bool,
    pub steps: usize,
    pub path_length: f64,
    pub shortest_path: f64,
    pub total_reward: f64,
    pub terminal_cause: TerminalCause,
    /// `V(s_T)` when the episode hit the step limit.
    pub bootstrap_value: Option<f64>,
}

/// Transitions in worker-major, episode-major order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub obs_dim: usize,
    pub observations: Vec<f64>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    /// Last transition of its episode, whether terminal or truncated.
    pub dones: Vec<bool>,
    pub episode_ids: Vec<usize>,
    pub episodes: Vec<EpisodeRecord>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    fn append(&mut self, mut other: RolloutBuffer) {
        let offset = self.episodes.len();
        self.observations.append(&mut other.observations);
        self.actions.append(&mut other.actions);
        self.log_probs.append(&mut other.log_probs);
        self.rewards.append(&mut other.rewards);
        self.values.append(&mut other.values);
        self.dones.append(&mut other.dones);
        self.episode_ids.extend(other.episode_ids.iter().map(|e| e + offset));
        self.episodes.append(&mut other.episodes);
    }

    /// Advantages and returns by GAE, with truncated episodes bootstrapped
    /// from `V(s_T)`.
    pub fn to_update_batch(&self, discount: f64, lambda: f64) -> UpdateBatch {
        let mut rewards = self.rewards.clone();
        for (t, &done) in self.dones.iter().enumerate() {
            if done {
                if let Some(v) = self.episodes[self.episode_ids[t]].bootstrap_value {
                    rewards[t] += discount * v;
                }
            }
        }
        let (advantages, returns) = compute_gae(&rewards, &self.values, &self.dones, discount, lambda);
        UpdateBatch {
            obs_dim: self.obs_dim,
            observations: self.observations.clone(),
            actions: self.actions.clone(),
            old_log_probs: self.log_probs.clone(),
            advantages,
            returns,
        }
    }
}

fn run_worker(policy: &Policy, ctx: &RolloutContext<'_>, worker: usize, quota: usize) -> Result<RolloutBuffer> {
    let mut rng = stream_rng(ctx.global_seed, Stream::Rollout, ctx.epoch, worker as u64);
    let source = TaskSource {
        scenes: ctx.scenes,
        constraints: ctx.constraints,
    };
    let mut buf = RolloutBuffer {
        obs_dim: OBS_DIM,
        ..Default::default()
    };
    while buf.len() < quota {
        let served = serve_task(ctx.predictor, ctx.stats, &source, &mut rng, ctx.timestep, ctx.curriculum)?;
        let scene = &ctx.scenes[served.scene_index];
        let ep = run_episode_recorded(policy, scene, &served.task, ctx.reward, ctx.constraints, &mut rng)?;
        let id = buf.episodes.len();
        let n = ep.steps.len();
        for (k, s) in ep.steps.into_iter().enumerate() {
            buf.observations.extend_from_slice(&s.observation);
            buf.actions.push(s.decision.action.index());
            buf.log_probs.push(s.decision.log_prob);
            buf.values.push(s.decision.value);
            buf.rewards.push(s.reward);
            buf.dones.push(k + 1 == n);
            buf.episode_ids.push(id);
        }
        buf.episodes.push(EpisodeRecord {
            success: ep.result.success,
            steps: ep.result.steps,
            path_length: ep.result.path_length,
            shortest_path: ep.result.shortest_path,
            total_reward: ep.result.total_reward(),
            terminal_cause: ep.result.terminal_cause,
            bootstrap_value: ep.bootstrap_value,
            worker,
            served,
        });
    }
    Ok(buf)
}

/// Collects at least `timesteps_per_update` transitions. Each logical worker
/// runs whole episodes until it has `ceil(T / workers)` steps; buffers are
/// merged in worker order so the result is independent of thread scheduling.
pub fn collect_rollouts(policy: &Policy, ctx: &RolloutContext<'_>, config: &PpoConfig) -> Result<RolloutBuffer> {
    let workers = config.rollout_workers;
    let quota = config.timesteps_per_update.div_ceil(workers);
    let parts: Vec<Result<RolloutBuffer>> = (0..workers)
        .into_par_iter()
        .map(|w| run_worker(policy, ctx, w, quota))
        .collect();
    let mut out = RolloutBuffer {
        obs_dim: OBS_DIM,
        ..Default::default()
    };
    for part in parts {
        out.append(part?);
    }
    Ok(out)
}
