use rand::Rng;

use crate::checkpoint::TensorArchive;
use crate::env::{Action, Agent, Decision};
use crate::error::{Error, Result};
use crate::nn::{relu_inplace, Layers};

/// Actor-critic network: a shared ReLU trunk feeding a 3-way action head
/// (categorical over [`Action::ALL`]) and a scalar value head.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub obs_dim: usize,
    pub hidden: Vec<usize>,
    pub layers: Layers,
}

/// Batch forward results kept for backpropagation.
#[derive(Debug, Default, Clone)]
pub struct PolicyCache {
    /// `trunk[0]` is the input batch, `trunk[k]` the k-th hidden activation.
    pub trunk: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub values: Vec<f64>,
}

pub const ACTIONS: usize = 3;

pub fn softmax(logits: &[f64]) -> [f64; ACTIONS] {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; ACTIONS];
    let mut z = 0.0;
    for (pk, &l) in p.iter_mut().zip(logits) {
        *pk = (l - m).exp();
        z += *pk;
    }
    p.map(|v| v / z)
}

pub fn log_softmax(logits: &[f64]) -> [f64; ACTIONS] {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    let mut out = [0.0; ACTIONS];
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = l - lse;
    }
    out
}

impl Policy {
    fn dims(obs_dim: usize, hidden: &[usize]) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = obs_dim;
        for &h in hidden {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, ACTIONS));
        dims.push((prev, 1));
        dims
    }

    pub fn zeros(obs_dim: usize, hidden: &[usize]) -> Self {
        Self {
            obs_dim,
            hidden: hidden.to_vec(),
            layers: Layers::zeros(&Self::dims(obs_dim, hidden)),
        }
    }

    /// Glorot-uniform trunk, near-uniform initial action distribution.
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let dims = Self::dims(obs_dim, hidden);
        let mut gains = vec![1.0; dims.len()];
        gains[hidden.len()] = 0.01;
        Self {
            obs_dim,
            hidden: hidden.to_vec(),
            layers: Layers::glorot(&dims, &gains, rng),
        }
    }

    fn action_layer(&self) -> usize {
        self.hidden.len()
    }

    fn value_layer(&self) -> usize {
        self.hidden.len() + 1
    }

    pub fn forward_batch(&self, obs: &[f64], batch: usize, cache: &mut PolicyCache) {
        let n = self.hidden.len();
        cache.trunk.resize_with(n + 1, Vec::new);
        cache.trunk[0].clear();
        cache.trunk[0].extend_from_slice(obs);
        for l in 0..n {
            let (before, after) = cache.trunk.split_at_mut(l + 1);
            self.layers.forward(l, &before[l], batch, &mut after[0]);
            relu_inplace(&mut after[0]);
        }
        let features = &cache.trunk[n];
        self.layers.forward(self.action_layer(), features, batch, &mut cache.logits);
        self.layers.forward(self.value_layer(), features, batch, &mut cache.values);
    }

    /// Action logits and value for one observation.
    pub fn forward_single(&self, obs: &[f64]) -> ([f64; ACTIONS], f64) {
        let mut a = Vec::with_capacity(256);
        let mut b = Vec::with_capacity(256);
        a.extend_from_slice(obs);
        for l in 0..self.hidden.len() {
            self.layers.forward_single(l, &a, &mut b);
            relu_inplace(&mut b);
            std::mem::swap(&mut a, &mut b);
        }
        self.layers.forward_single(self.action_layer(), &a, &mut b);
        let logits = [b[0], b[1], b[2]];
        self.layers.forward_single(self.value_layer(), &a, &mut b);
        (logits, b[0])
    }

    /// Action distribution and value estimate.
    pub fn policy_forward(&self, obs: &[f64]) -> ([f64; ACTIONS], f64) {
        let (logits, v) = self.forward_single(obs);
        (softmax(&logits), v)
    }

    pub fn to_archive(&self) -> TensorArchive {
        let mut a = TensorArchive::new("policy");
        a.push_meta("obs_dim", self.obs_dim);
        let hidden: Vec<String> = self.hidden.iter().map(|h| h.to_string()).collect();
        a.push_meta("hidden", hidden.join(" "));
        a.push_meta("actions", ACTIONS);
        a.push_tensor("params", &self.layers.params);
        a
    }

    pub fn from_archive(a: &TensorArchive) -> Result<Self> {
        a.expect_kind("policy")?;
        let obs_dim: usize = a.meta_parsed("obs_dim")?;
        let hidden = a
            .meta("hidden")?
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<Vec<usize>, _>>()
            .map_err(|_| Error::parse(0, "invalid hidden sizes"))?;
        if a.meta_parsed::<usize>("actions")? != ACTIONS
            || obs_dim == 0
            || obs_dim > 1 << 16
            || hidden.iter().any(|&h| h == 0 || h > 1 << 12)
        {
            return Err(Error::parse(0, "unsupported policy architecture"));
        }
        let mut p = Self::zeros(obs_dim, &hidden);
        let params = a.tensor("params")?;
        if params.len() != p.layers.len() {
            return Err(Error::parse(0, "parameter count does not match architecture"));
        }
        p.layers.params.copy_from_slice(params);
        Ok(p)
    }
}

/// Inverse-CDF categorical draw.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64; ACTIONS], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    ACTIONS - 1
}

impl Agent for Policy {
    fn decide<R: Rng + ?Sized>(&self, observation: &[f64], rng: &mut R) -> Decision {
        let (logits, value) = self.forward_single(observation);
        let logp = log_softmax(&logits);
        let probs = logp.map(f64::exp);
        let k = sample_categorical(&probs, rng);
        Decision {
            action: Action::from_index(k).expect("three actions"),
            log_prob: logp[k],
            value,
        }
    }

    fn value(&self, observation: &[f64]) -> f64 {
        self.forward_single(observation).1
    }
}
