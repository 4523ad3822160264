use rand::seq::SliceRandom;
use rand::Rng;

use super::policy::{log_softmax, Policy, PolicyCache, ACTIONS};
use super::{normalize_advantages, OptimizerKind, PpoConfig};
use crate::error::{Error, Result};
use crate::nn::{relu_backward, sgd_step, Adam};

/// Flattened on-policy samples for one update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateBatch {
    pub obs_dim: usize,
    /// Row-major `len × obs_dim`.
    pub observations: Vec<f64>,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl UpdateBatch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    fn gather(&self, idx: &[usize]) -> UpdateBatch {
        let d = self.obs_dim;
        let mut out = UpdateBatch {
            obs_dim: d,
            ..Default::default()
        };
        out.observations.reserve(idx.len() * d);
        for &i in idx {
            out.observations.extend_from_slice(&self.observations[i * d..(i + 1) * d]);
            out.actions.push(self.actions[i]);
            out.old_log_probs.push(self.old_log_probs[i]);
            out.advantages.push(self.advantages[i]);
            out.returns.push(self.returns[i]);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateDiagnostics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub gradient_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Adam(Adam),
    Sgd { lr: f64 },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, n: usize, lr: f64) -> Self {
        match kind {
            OptimizerKind::Adam => Optimizer::Adam(Adam::new(n, lr)),
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        match self {
            Optimizer::Adam(a) => a.step(params, grad),
            Optimizer::Sgd { lr } => sgd_step(params, grad, *lr),
        }
    }
}

/// Clipped-surrogate loss to minimize,
/// `-mean(min(ρA, clip(ρ)A)) + c1·mean((V - R)²) - c2·mean(H)`,
/// with advantages used as given. Accumulates the parameter gradient into
/// `grad` when provided.
pub fn ppo_loss_and_grad(
    policy: &Policy,
    batch: &UpdateBatch,
    clip_range: f64,
    value_coef: f64,
    entropy_coef: f64,
    cache: &mut PolicyCache,
    grad: Option<&mut Vec<f64>>,
) -> LossParts {
    let n = batch.len();
    policy.forward_batch(&batch.observations, n, cache);
    let inv_n = 1.0 / n as f64;
    let mut parts = LossParts::default();
    let want_grad = grad.is_some();
    let mut d_logits = if want_grad { vec![0.0; n * ACTIONS] } else { Vec::new() };
    let mut d_values = if want_grad { vec![0.0; n] } else { Vec::new() };

    for i in 0..n {
        let logits = &cache.logits[i * ACTIONS..(i + 1) * ACTIONS];
        let logp = log_softmax(logits);
        let p = logp.map(f64::exp);
        let a = batch.actions[i];
        let adv = batch.advantages[i];
        let log_ratio = logp[a] - batch.old_log_probs[i];
        let ratio = log_ratio.exp();
        let clipped = ratio.clamp(1.0 - clip_range, 1.0 + clip_range);
        let surr1 = ratio * adv;
        let surr2 = clipped * adv;
        let entropy: f64 = -p.iter().zip(&logp).map(|(pk, lk)| pk * lk).sum::<f64>();
        let verr = cache.values[i] - batch.returns[i];

        parts.policy -= surr1.min(surr2);
        parts.value += verr * verr;
        parts.entropy += entropy;
        if (ratio - 1.0).abs() > clip_range {
            parts.clip_fraction += 1.0;
        }
        parts.approx_kl += (ratio - 1.0) - log_ratio;

        if want_grad {
            // The surrogate carries gradient unless the clipped branch is the
            // minimum and the ratio sits outside the trust region.
            let live = surr1 <= surr2 || (ratio - clipped).abs() == 0.0;
            let d_logp_a = if live { -adv * ratio * inv_n } else { 0.0 };
            let row = &mut d_logits[i * ACTIONS..(i + 1) * ACTIONS];
            for k in 0..ACTIONS {
                let onehot = if k == a { 1.0 } else { 0.0 };
                row[k] = d_logp_a * (onehot - p[k]) + entropy_coef * inv_n * p[k] * (logp[k] + entropy);
            }
            d_values[i] = 2.0 * value_coef * verr * inv_n;
        }
    }
    parts.policy *= inv_n;
    parts.value *= inv_n;
    parts.entropy *= inv_n;
    parts.clip_fraction *= inv_n;
    parts.approx_kl *= inv_n;
    parts.total = parts.policy + value_coef * parts.value - entropy_coef * parts.entropy;

    if let Some(grad) = grad {
        let layers = &policy.layers;
        let h = policy.hidden.len();
        let features = &cache.trunk[h];
        let mut d_feat = Vec::new();
        let mut d_feat_v = Vec::new();
        layers.backward(h, features, &d_logits, n, grad, Some(&mut d_feat));
        layers.backward(h + 1, features, &d_values, n, grad, Some(&mut d_feat_v));
        for (a, b) in d_feat.iter_mut().zip(&d_feat_v) {
            *a += b;
        }
        let mut dy = d_feat;
        for l in (0..h).rev() {
            relu_backward(&cache.trunk[l + 1], &mut dy);
            let mut dx = Vec::new();
            layers.backward(l, &cache.trunk[l], &dy, n, grad, (l > 0).then_some(&mut dx));
            dy = dx;
        }
    }
    parts
}

/// Runs `inner_epochs` passes of `minibatches` gradient steps each.
/// Advantages are normalized once over the whole batch. On a non-finite loss
/// the policy is restored to its state before the call.
pub fn ppo_update<R: Rng + ?Sized>(
    policy: &mut Policy,
    batch: &UpdateBatch,
    config: &PpoConfig,
    optimizer: &mut Optimizer,
    rng: &mut R,
) -> Result<UpdateDiagnostics> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut normalized = batch.clone();
    normalize_advantages(&mut normalized.advantages);

    let backup = (policy.layers.params.clone(), optimizer.clone());
    let mut cache = PolicyCache::default();
    let mut grad = vec![0.0; policy.layers.len()];
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let mut diag = UpdateDiagnostics::default();
    let mut parts_sum = LossParts::default();

    for _ in 0..config.inner_epochs {
        let chunks: Vec<UpdateBatch> = if config.minibatches == 1 {
            Vec::new()
        } else {
            order.shuffle(rng);
            let size = batch.len().div_ceil(config.minibatches);
            order.chunks(size).map(|c| normalized.gather(c)).collect()
        };
        let views: Vec<&UpdateBatch> = if config.minibatches == 1 {
            vec![&normalized]
        } else {
            chunks.iter().collect()
        };
        for mb in views {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let parts = ppo_loss_and_grad(
                policy,
                mb,
                config.clip_range,
                config.value_coef,
                config.entropy_coef,
                &mut cache,
                Some(&mut grad),
            );
            if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                policy.layers.params = backup.0;
                *optimizer = backup.1;
                return Err(Error::NonFiniteLoss {
                    stage: "ppo".into(),
                    loss: parts.total,
                });
            }
            optimizer.step(&mut policy.layers.params, &grad);
            diag.gradient_steps += 1;
            parts_sum.policy += parts.policy;
            parts_sum.value += parts.value;
            parts_sum.entropy += parts.entropy;
            parts_sum.clip_fraction += parts.clip_fraction;
            parts_sum.approx_kl += parts.approx_kl;
        }
    }
    let k = diag.gradient_steps as f64;
    diag.policy_loss = parts_sum.policy / k;
    diag.value_loss = parts_sum.value / k;
    diag.entropy = parts_sum.entropy / k;
    diag.clip_fraction = parts_sum.clip_fraction / k;
    diag.approx_kl = parts_sum.approx_kl / k;
    Ok(diag)
}
