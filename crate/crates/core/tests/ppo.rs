mod common;

use navacl::curriculum::CurriculumConfig;
use navacl::env::{RewardConfig, OBS_DIM};
use navacl::features::FeatureStats;
use navacl::predictor::{init_predictor, DifficultyStats, Predictor};
use navacl::ppo::{
    collect_rollouts, compute_gae, log_softmax, ppo_loss_and_grad, Policy, PolicyCache, PpoConfig, RolloutContext,
    UpdateBatch, ACTIONS,
};
use navacl::seeding::{stream_rng, Stream};
use navacl::world::{generate_scene, GenConfig, TaskConstraints};
use proptest::prelude::*;
use rand::Rng;

/// Random rewards, values and episode boundaries.
fn random_sequence(seed: u64) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let mut rng = stream_rng(seed, Stream::Validation, 20, 0);
    let n = rng.random_range(1..60);
    let rewards = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let values = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let dones = (0..n).map(|_| rng.random_bool(0.1)).collect();
    (rewards, values, dones)
}

/// Discounted sum of rewards from `t` to the end of its episode.
fn brute_return(rewards: &[f64], dones: &[bool], t: usize, gamma: f64) -> f64 {
    let mut total = 0.0;
    let mut discount = 1.0;
    for k in t..rewards.len() {
        total += discount * rewards[k];
        discount *= gamma;
        if dones[k] {
            break;
        }
    }
    total
}

#[test]
fn gae_with_unit_lambda_is_monte_carlo() {
    let gamma = 0.99;
    for seed in 0..100 {
        let (r, v, d) = random_sequence(seed);
        let (adv, ret) = compute_gae(&r, &v, &d, gamma, 1.0);
        for t in 0..r.len() {
            let want = brute_return(&r, &d, t, gamma) - v[t];
            assert!((adv[t] - want).abs() < 1e-10, "seed {seed} t {t}");
            assert!((ret[t] - adv[t] - v[t]).abs() < 1e-12);
        }
    }
}

proptest! {
    #[test]
    fn gae_is_weighted_sum_of_td_errors(seed in 0u64..100_000, lambda in 0.0..=1.0f64) {
        let gamma = 0.97;
        let (r, v, d) = random_sequence(seed);
        let (adv, _) = compute_gae(&r, &v, &d, gamma, lambda);
        let n = r.len();
        let td: Vec<f64> = (0..n)
            .map(|t| {
                let next = if d[t] || t + 1 == n { 0.0 } else { v[t + 1] };
                r[t] + gamma * next - v[t]
            })
            .collect();
        for t in 0..n {
            let mut want = 0.0;
            let mut w = 1.0;
            for k in t..n {
                want += w * td[k];
                if d[k] {
                    break;
                }
                w *= gamma * lambda;
            }
            prop_assert!((adv[t] - want).abs() < 1e-10);
        }
    }
}

fn tiny_batch(seed: u64, policy: &Policy, ratio_noise: f64) -> UpdateBatch {
    let mut rng = stream_rng(seed, Stream::Validation, 21, 0);
    let n = 10;
    let obs_dim = policy.obs_dim;
    let observations: Vec<f64> = (0..n * obs_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let actions: Vec<usize> = (0..n).map(|_| rng.random_range(0..ACTIONS)).collect();
    let mut cache = PolicyCache::default();
    policy.forward_batch(&observations, n, &mut cache);
    let old_log_probs = (0..n)
        .map(|i| log_softmax(&cache.logits[i * ACTIONS..(i + 1) * ACTIONS])[actions[i]] + ratio_noise * rng.random_range(-1.0..1.0))
        .collect();
    UpdateBatch {
        obs_dim,
        observations,
        actions,
        old_log_probs,
        advantages: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        returns: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    }
}

fn tiny_policy(seed: u64) -> Policy {
    let mut rng = stream_rng(seed, Stream::Init, 21, 0);
    let mut p = Policy::new(4, &[8], &mut rng);
    p.layers.params.iter_mut().for_each(|w| *w += rng.random_range(-0.3..0.3));
    p
}

#[test]
fn first_step_gradient_is_policy_gradient() {
    for seed in 0..10 {
        let mut policy = tiny_policy(seed);
        let batch = tiny_batch(seed, &policy, 0.0);
        let mut cache = PolicyCache::default();
        let mut grad = vec![0.0; policy.layers.len()];
        ppo_loss_and_grad(&policy, &batch, 0.1, 0.0, 0.0, &mut cache, Some(&mut grad));
        // Plain estimator: -mean(A · log π(a|s)).
        let n = batch.len() as f64;
        let tensors = common::layer_tensors(&policy.layers);
        let mut params = policy.layers.params.clone();
        let err = common::grad_check(&mut params, &grad, &tensors, 1e-5, |p| {
            policy.layers.params.copy_from_slice(p);
            policy.forward_batch(&batch.observations, batch.len(), &mut cache);
            -(0..batch.len())
                .map(|i| batch.advantages[i] * log_softmax(&cache.logits[i * ACTIONS..(i + 1) * ACTIONS])[batch.actions[i]])
                .sum::<f64>()
                / n
        });
        assert!(err < 1e-6, "seed {seed}: {err:e}");
    }
}

#[test]
fn zero_clip_range_is_min_of_ratio_and_one() {
    for seed in 0..10 {
        let policy = tiny_policy(seed);
        let batch = tiny_batch(seed, &policy, 0.5);
        let mut cache = PolicyCache::default();
        let parts = ppo_loss_and_grad(&policy, &batch, 0.0, 0.0, 0.0, &mut cache, None);
        let want = -(0..batch.len())
            .map(|i| {
                let logp = log_softmax(&cache.logits[i * ACTIONS..(i + 1) * ACTIONS])[batch.actions[i]];
                let rho = (logp - batch.old_log_probs[i]).exp();
                let a = batch.advantages[i];
                (rho * a).min(a)
            })
            .sum::<f64>()
            / batch.len() as f64;
        assert!((parts.policy - want).abs() < 1e-12);

        // Positive advantages with ratios at or above one carry no gradient.
        let mut pos = batch.clone();
        for i in 0..pos.len() {
            pos.advantages[i] = pos.advantages[i].abs() + 0.1;
            let logp = log_softmax(&cache.logits[i * ACTIONS..(i + 1) * ACTIONS])[pos.actions[i]];
            pos.old_log_probs[i] = logp - 0.2;
        }
        let mut grad = vec![0.0; policy.layers.len()];
        ppo_loss_and_grad(&policy, &pos, 0.0, 0.0, 0.0, &mut cache, Some(&mut grad));
        assert!(grad.iter().all(|&g| g == 0.0));
    }
}

#[test]
fn rollout_buffer_is_consistent() {
    let scene = generate_scene(3, &GenConfig::default()).unwrap();
    let constraints = TaskConstraints::default();
    let reward = RewardConfig::default();
    let curriculum = CurriculumConfig::default();
    let predictor = Predictor {
        mlp: init_predictor(3),
        feature_stats: FeatureStats::default(),
    };
    let stats = DifficultyStats::from_predictions(&[0.4, 0.6]);
    let policy = Policy::new(OBS_DIM, &[32], &mut stream_rng(3, Stream::Init, 1, 0));
    let config = PpoConfig {
        timesteps_per_update: 600,
        rollout_workers: 3,
        ..PpoConfig::default()
    };
    let ctx = RolloutContext {
        scenes: std::slice::from_ref(&scene),
        constraints: &constraints,
        reward: &reward,
        curriculum: &curriculum,
        predictor: &predictor,
        stats: &stats,
        global_seed: 3,
        epoch: 0,
        timestep: 0,
    };
    let buf = collect_rollouts(&policy, &ctx, &config).unwrap();
    let n = buf.rewards.len();
    assert!(n >= 600);
    assert_eq!(buf.observations.len(), n * OBS_DIM);
    assert_eq!(*buf.dones.last().unwrap(), true);
    // Episode ids are contiguous, and each episode ends exactly at its done flag.
    let mut start = 0;
    for (e, ep) in buf.episodes.iter().enumerate() {
        let end = start + ep.steps;
        assert!(buf.episode_ids[start..end].iter().all(|&id| id == e));
        assert!(buf.dones[start..end - 1].iter().all(|&d| !d));
        assert!(buf.dones[end - 1]);
        let total: f64 = buf.rewards[start..end].iter().sum();
        assert!((total - ep.total_reward).abs() < 1e-9);
        assert_eq!(ep.bootstrap_value.is_some(), !ep.success && ep.terminal_cause.name() == "timeout");
        start = end;
    }
    assert_eq!(start, n);

    let again = collect_rollouts(&policy, &ctx, &config).unwrap();
    assert_eq!(buf.rewards, again.rewards);
    assert_eq!(buf.actions, again.actions);
}
