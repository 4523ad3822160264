//! Task-success predictor and the adaptive difficulty statistics.
//!
//! The predictor is a small multilayer perceptron (8 → 64 → 64 → 1, ReLU
//! hidden units, logistic output) trained with binary cross-entropy on
//! `(features, success)` pairs collected from rollouts.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::checkpoint::TensorArchive;
use crate::error::{Error, Result};
use crate::features::{self, normalize_features, FeatureStats, TaskFeatures, FEATURE_COUNT};
use crate::nn::{relu_backward, relu_inplace, sigmoid, sgd_step, Layers};
use crate::seeding::{stream_rng, Stream};
use crate::world::{self, Scene, TaskConstraints};

pub const LAYER_SIZES: [usize; 4] = [FEATURE_COUNT, 64, 64, 1];
pub const SIGMA_FLOOR: f64 = 1e-3;

/// Feed-forward network with ReLU hidden layers and a sigmoid output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub layers: Layers,
}

/// Forward activations kept for backpropagation.
#[derive(Debug, Default)]
pub struct Activations {
    /// `acts[0]` is the input; `acts[k]` the post-ReLU output of layer `k - 1`;
    /// the last entry holds output logits.
    pub acts: Vec<Vec<f64>>,
}

impl Mlp {
    fn dims(sizes: &[usize]) -> Vec<(usize, usize)> {
        sizes.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least one layer");
        Self {
            sizes: sizes.to_vec(),
            layers: Layers::zeros(&Self::dims(sizes)),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let dims = Self::dims(sizes);
        Self {
            sizes: sizes.to_vec(),
            layers: Layers::glorot(&dims, &vec![1.0; dims.len()], rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    /// Output logits for a batch.
    pub fn forward(&self, x: &[f64], batch: usize, act: &mut Activations) {
        let n = self.layers.shapes.len();
        act.acts.resize_with(n + 1, Vec::new);
        act.acts[0].clear();
        act.acts[0].extend_from_slice(x);
        for l in 0..n {
            let (before, after) = act.acts.split_at_mut(l + 1);
            self.layers.forward(l, &before[l], batch, &mut after[0]);
            if l + 1 < n {
                relu_inplace(&mut after[0]);
            }
        }
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        let mut act = Activations::default();
        self.forward(x, 1, &mut act);
        act.acts.last().expect("output")[0]
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    /// Mean binary cross-entropy over a batch and its parameter gradient.
    pub fn bce_loss_and_grad(&self, x: &[f64], y: &[f64], grad: Option<&mut Vec<f64>>) -> f64 {
        let batch = y.len();
        let mut act = Activations::default();
        self.forward(x, batch, &mut act);
        let logits = act.acts.last().expect("output");
        let inv = 1.0 / batch as f64;
        let loss = logits
            .iter()
            .zip(y)
            .map(|(&z, &t)| z.max(0.0) - t * z + (-z.abs()).exp().ln_1p())
            .sum::<f64>()
            * inv;
        if let Some(grad) = grad {
            grad.clear();
            grad.resize(self.layers.len(), 0.0);
            let mut dy: Vec<f64> = logits.iter().zip(y).map(|(&z, &t)| (sigmoid(z) - t) * inv).collect();
            let mut dx = Vec::new();
            for l in (0..self.layers.shapes.len()).rev() {
                let need_input = l > 0;
                self.layers.backward(
                    l,
                    &act.acts[l],
                    &dy,
                    batch,
                    grad,
                    need_input.then_some(&mut dx),
                );
                if need_input {
                    relu_backward(&act.acts[l], &mut dx);
                    std::mem::swap(&mut dy, &mut dx);
                }
            }
        }
        loss
    }
}

/// Predictor snapshot: network plus the input standardization it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    pub mlp: Mlp,
    pub feature_stats: FeatureStats,
}

impl Predictor {
    pub fn predict_features(&self, features: &TaskFeatures) -> f64 {
        self.mlp.predict(&normalize_features(features, &self.feature_stats))
    }

    pub fn to_archive(&self) -> TensorArchive {
        let mut a = TensorArchive::new("predictor");
        let sizes: Vec<String> = self.mlp.sizes.iter().map(|s| s.to_string()).collect();
        a.push_meta("layers", sizes.join(" "));
        a.push_tensor("params", &self.mlp.layers.params);
        a.push_tensor("feature_mean", &self.feature_stats.mean);
        a.push_tensor("feature_std", &self.feature_stats.std);
        a
    }

    pub fn from_archive(a: &TensorArchive) -> Result<Self> {
        a.expect_kind("predictor")?;
        let sizes = a
            .meta("layers")?
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::parse(0, "invalid layer sizes"))?;
        if sizes.len() < 2 || sizes[0] != FEATURE_COUNT || *sizes.last().unwrap() != 1 || sizes.iter().any(|&s| s == 0 || s > 4096) {
            return Err(Error::parse(0, format!("unsupported predictor architecture {sizes:?}")));
        }
        let mut mlp = Mlp::zeros(&sizes);
        let params = a.tensor("params")?;
        if params.len() != mlp.layers.len() {
            return Err(Error::parse(0, "parameter count does not match architecture"));
        }
        mlp.layers.params.copy_from_slice(params);
        let fixed = |name: &str| -> Result<[f64; FEATURE_COUNT]> {
            a.tensor(name)?
                .try_into()
                .map_err(|_| Error::parse(0, format!("`{name}` must have {FEATURE_COUNT} values")))
        };
        Ok(Self {
            mlp,
            feature_stats: FeatureStats {
                mean: fixed("feature_mean")?,
                std: fixed("feature_std")?,
            },
        })
    }
}

/// Deterministic Glorot-initialised predictor for a seed.
pub fn init_predictor(seed: u64) -> Mlp {
    let mut rng = stream_rng(seed, Stream::Init, 0, 0);
    Mlp::glorot(&LAYER_SIZES, &mut rng)
}

pub fn predict(mlp: &Mlp, features_normalized: &[f64]) -> f64 {
    mlp.predict(features_normalized)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTask {
    /// Standardized feature vector.
    pub features: [f64; FEATURE_COUNT],
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorTrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for PredictorTrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 4,
            batch_size: 32,
        }
    }
}

/// Minibatch gradient descent on mean binary cross-entropy. Returns the
/// full-batch loss after each epoch.
pub fn train_predictor<R: Rng + ?Sized>(
    mlp: &mut Mlp,
    batch: &[LabeledTask],
    config: &PredictorTrainConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let dim = mlp.input_dim();
    let x_all: Vec<f64> = batch.iter().flat_map(|t| t.features).collect();
    let y_all: Vec<f64> = batch.iter().map(|t| f64::from(u8::from(t.success))).collect();
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let mut grad = Vec::new();
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(config.batch_size.max(1)) {
            x.clear();
            y.clear();
            for &k in chunk {
                x.extend_from_slice(&x_all[k * dim..(k + 1) * dim]);
                y.push(y_all[k]);
            }
            let loss = mlp.bce_loss_and_grad(&x, &y, Some(&mut grad));
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    stage: format!("predictor epoch {epoch}, minibatch of {}", chunk.len()),
                    loss,
                });
            }
            sgd_step(&mut mlp.layers.params, &grad, config.learning_rate);
        }
        let loss = mlp.bce_loss_and_grad(&x_all, &y_all, None);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                stage: format!("predictor epoch {epoch} evaluation"),
                loss,
            });
        }
        history.push(loss);
    }
    Ok(history)
}

/// Normal fit of predicted success over random tasks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifficultyStats {
    pub mu_f: f64,
    pub sigma_f: f64,
    pub sample_count: usize,
}

impl DifficultyStats {
    /// Population mean and standard deviation, sigma floored at [`SIGMA_FLOOR`].
    pub fn from_predictions(p: &[f64]) -> Self {
        let n = p.len().max(1) as f64;
        let mu = p.iter().sum::<f64>() / n;
        let var = p.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
        Self {
            mu_f: mu,
            sigma_f: var.sqrt().max(SIGMA_FLOOR),
            sample_count: p.len(),
        }
    }
}

/// Predicts success on `n_samples` random tasks drawn from scenes chosen
/// uniformly and fits a normal distribution to the predictions.
pub fn fit_difficulty_stats<R: Rng + ?Sized>(
    predictor: &Predictor,
    scenes: &[Scene],
    constraints: &TaskConstraints,
    rng: &mut R,
    n_samples: usize,
) -> Result<DifficultyStats> {
    let mut preds = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let scene = &scenes[rng.random_range(0..scenes.len())];
        let (task, d) = world::sample::sample_random_task_with_distance(scene, rng, constraints)?;
        let f = features::features_with_geodesic(scene, &task, d)?;
        preds.push(predictor.predict_features(&f));
    }
    Ok(DifficultyStats::from_predictions(&preds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_half() {
        let mlp = Mlp::zeros(&LAYER_SIZES);
        assert_eq!(predict(&mlp, &[3.0, -1.0, 0.0, 2.0, 5.0, 1.0, 1.0, 9.0]), 0.5);
    }

    #[test]
    fn hand_set_chain() {
        // x0 -> h1[0] -> h2[0] -> out
        let mut mlp = Mlp::zeros(&LAYER_SIZES);
        let s = mlp.layers.shapes.clone();
        let (w1, w2, w3) = (0.7, -1.3, 2.1);
        mlp.layers.params[s[0].weight_range().start] = w1; // W1[0][0]
        mlp.layers.params[s[1].weight_range().start] = w2; // W2[0][0]
        mlp.layers.params[s[2].weight_range().start] = w3; // W3[0][0]
        let relu = |v: f64| v.max(0.0);
        for x0 in [-2.0, -0.5, 0.3, 1.7] {
            let mut x = [0.0; 8];
            x[0] = x0;
            let expected = 1.0 / (1.0 + (-(w3 * relu(w2 * relu(w1 * x0)))).exp());
            assert!((predict(&mlp, &x) - expected).abs() < 1e-15);
        }
        // Sign flip keeps the chain alive for negative inputs.
        mlp.layers.params[s[0].weight_range().start] = -w1;
        mlp.layers.params[s[1].weight_range().start] = -w2;
        let mut x = [0.0; 8];
        x[0] = -1.0;
        let expected = 1.0 / (1.0 + (-(w3 * relu(-w2 * relu(w1)))).exp());
        assert!((predict(&mlp, &x) - expected).abs() < 1e-15);
    }

    #[test]
    fn monotone_single_path() {
        let mut mlp = Mlp::zeros(&LAYER_SIZES);
        let s = mlp.layers.shapes.clone();
        mlp.layers.params[s[0].weight_range().start] = 1.0;
        mlp.layers.params[s[1].weight_range().start] = 1.0;
        mlp.layers.params[s[2].weight_range().start] = 0.5;
        let mut last = 0.0;
        for k in 0..50 {
            let mut x = [0.0; 8];
            x[0] = k as f64 * 0.2;
            let p = predict(&mlp, &x);
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let a = init_predictor(3);
        assert_eq!(a, init_predictor(3));
        assert_ne!(a, init_predictor(4));
        let s = a.layers.shapes[0];
        let limit = (6.0 / 72.0f64).sqrt();
        assert!(a.layers.params[s.weight_range()].iter().all(|w| w.abs() <= limit));
        assert!(a.layers.params[s.bias_range()].iter().all(|&b| b == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let x: Vec<f64> = (0..8).map(|_| rng.random_range(-50.0..50.0)).collect();
            let p = predict(&a, &x);
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn empty_batch_rejected() {
        let mut mlp = init_predictor(0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            train_predictor(&mut mlp, &[], &PredictorTrainConfig::default(), &mut rng),
            Err(Error::EmptyBatch)
        ));
    }

    #[test]
    fn constant_predictions_floor_sigma() {
        let stats = DifficultyStats::from_predictions(&[0.5; 10]);
        assert_eq!(stats.mu_f, 0.5);
        assert_eq!(stats.sigma_f, SIGMA_FLOOR);
    }

    #[test]
    fn archive_round_trip() {
        let p = Predictor {
            mlp: init_predictor(9),
            feature_stats: FeatureStats::default(),
        };
        let back = Predictor::from_archive(&TensorArchive::parse(&p.to_archive().render()).unwrap()).unwrap();
        assert_eq!(back, p);
    }
}
