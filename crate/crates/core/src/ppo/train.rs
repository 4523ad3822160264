//! The outer loop: rollouts under the curriculum, a PPO update, predictor
//! training on the latest outcomes, and a refit of the difficulty statistics.
//!
//! Every random draw comes from a stream keyed by `(seed, purpose, epoch)`,
//! so a run resumed from its state file continues exactly as if it had
//! never stopped.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use rand::Rng;

use super::{collect_rollouts, ppo_update, Optimizer, Policy, PpoConfig, RolloutContext, UpdateDiagnostics};
use crate::checkpoint::TensorArchive;
use crate::curriculum::{CurriculumConfig, TaskType};
use crate::env::{RewardConfig, OBS_DIM};
use crate::error::{Error, Result};
use crate::features::{compute_features, normalize_features, FeatureStats, FEATURE_COUNT};
use crate::harness::io::write_atomic;
use crate::metrics::{
    evaluate, parse_curriculum_csv, spl, success_rate, write_curriculum_csv, CurriculumLogRow, EvalReport,
    PathOutcome, SceneTask,
};
use crate::nn::Adam;
use crate::predictor::{
    fit_difficulty_stats, init_predictor, train_predictor, DifficultyStats, LabeledTask, Predictor,
    PredictorTrainConfig,
};
use crate::seeding::{mix_seed, stream_rng, Stream};
use crate::world::{sample_random_task, Scene, TaskConstraints};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    pub total_timesteps: u64,
    pub ppo: PpoConfig,
    pub reward: RewardConfig,
    pub curriculum: CurriculumConfig,
    pub constraints: TaskConstraints,
    pub predictor: PredictorTrainConfig,
    /// Most recent labelled episodes kept for predictor training.
    pub predictor_window: usize,
    /// Random tasks per refit of the difficulty statistics.
    pub stats_samples: usize,
    /// Random tasks used once to fit the feature standardization.
    pub normalization_samples: usize,
    /// Validate every this many epochs, and always after the last one.
    pub eval_every: u64,
    pub validation_tasks: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            total_timesteps: 300_000,
            ppo: PpoConfig::default(),
            reward: RewardConfig::default(),
            curriculum: CurriculumConfig::default(),
            constraints: TaskConstraints::default(),
            predictor: PredictorTrainConfig::default(),
            predictor_window: 2048,
            stats_samples: 512,
            normalization_samples: 1024,
            eval_every: 5,
            validation_tasks: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        self.reward.validate()?;
        self.curriculum.validate()?;
        if self.total_timesteps == 0 {
            return Err(Error::Config("total_timesteps must be positive".into()));
        }
        if self.predictor_window == 0 || self.stats_samples == 0 || self.normalization_samples == 0 {
            return Err(Error::Config("predictor window and sample counts must be positive".into()));
        }
        if self.eval_every == 0 || self.validation_tasks == 0 {
            return Err(Error::Config("eval_every and validation_tasks must be positive".into()));
        }
        if !(self.predictor.learning_rate > 0.0) || self.predictor.epochs == 0 || self.predictor.batch_size == 0 {
            return Err(Error::Config("predictor training parameters must be positive".into()));
        }
        if (self.reward.agent_radius - self.constraints.agent_radius).abs() > 0.0 {
            return Err(Error::Config("reward and task agent radii differ".into()));
        }
        Ok(())
    }
}

/// One line of `metrics.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub epoch: u64,
    pub timesteps: u64,
    pub episodes: usize,
    pub success_rate: f64,
    pub spl: f64,
    pub mean_reward: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    /// False when the update hit a non-finite loss and was rolled back.
    pub update_ok: bool,
    pub predictor_loss: f64,
    pub mu_f: f64,
    pub sigma_f: f64,
    pub fallback_rate: f64,
    pub mean_geodesic: f64,
    /// Mean geodesic over easy, frontier and GOID serves.
    pub curriculum_geodesic: Option<f64>,
    pub val_success: Option<f64>,
    pub val_spl: Option<f64>,
}

pub const METRICS_HEADER: [&str; 20] = [
    "epoch",
    "timesteps",
    "episodes",
    "success_rate",
    "spl",
    "mean_reward",
    "policy_loss",
    "value_loss",
    "entropy",
    "clip_fraction",
    "approx_kl",
    "update_ok",
    "predictor_loss",
    "mu_f",
    "sigma_f",
    "fallback_rate",
    "mean_geodesic",
    "curriculum_geodesic",
    "val_success",
    "val_spl",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.epoch.to_string(),
            self.timesteps.to_string(),
            self.episodes.to_string(),
            self.success_rate.to_string(),
            self.spl.to_string(),
            self.mean_reward.to_string(),
            self.policy_loss.to_string(),
            self.value_loss.to_string(),
            self.entropy.to_string(),
            self.clip_fraction.to_string(),
            self.approx_kl.to_string(),
            u8::from(self.update_ok).to_string(),
            self.predictor_loss.to_string(),
            self.mu_f.to_string(),
            self.sigma_f.to_string(),
            self.fallback_rate.to_string(),
            self.mean_geodesic.to_string(),
            opt(self.curriculum_geodesic),
            opt(self.val_success),
            opt(self.val_spl),
        ]
    }
}

pub fn write_metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = METRICS_HEADER.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.record().join(","));
        out.push('\n');
    }
    out
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers().map_err(|e| Error::parse(1, e.to_string()))?;
    if header.iter().ne(METRICS_HEADER) {
        return Err(Error::parse(1, "unexpected metrics header"));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| Error::parse(0, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let get = |k: usize| -> Result<&str> { rec.get(k).ok_or_else(|| Error::parse(line, "missing field")) };
        let num = |k: usize| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::parse(line, format!("invalid `{}`", METRICS_HEADER[k])))
        };
        let int = |k: usize| -> Result<u64> {
            get(k)?
                .parse()
                .map_err(|_| Error::parse(line, format!("invalid `{}`", METRICS_HEADER[k])))
        };
        let maybe = |k: usize| -> Result<Option<f64>> {
            match get(k)? {
                "" => Ok(None),
                _ => num(k).map(Some),
            }
        };
        rows.push(MetricsRow {
            epoch: int(0)?,
            timesteps: int(1)?,
            episodes: int(2)? as usize,
            success_rate: num(3)?,
            spl: num(4)?,
            mean_reward: num(5)?,
            policy_loss: num(6)?,
            value_loss: num(7)?,
            entropy: num(8)?,
            clip_fraction: num(9)?,
            approx_kl: num(10)?,
            update_ok: match get(11)? {
                "1" => true,
                "0" => false,
                _ => return Err(Error::parse(line, "invalid `update_ok`")),
            },
            predictor_loss: num(12)?,
            mu_f: num(13)?,
            sigma_f: num(14)?,
            fallback_rate: num(15)?,
            mean_geodesic: num(16)?,
            curriculum_geodesic: maybe(17)?,
            val_success: maybe(18)?,
            val_spl: maybe(19)?,
        });
    }
    Ok(rows)
}

/// Mutable training state between epochs.
#[derive(Debug, Clone)]
pub struct TrainState {
    /// Completed epochs.
    pub epoch: u64,
    pub timestep: u64,
    pub policy: Policy,
    pub optimizer: Optimizer,
    pub predictor: Predictor,
    pub stats: DifficultyStats,
    pub window: VecDeque<LabeledTask>,
}

impl TrainState {
    pub fn to_archive(&self) -> TensorArchive {
        let mut a = TensorArchive::new("train-state");
        a.push_meta("epoch", self.epoch);
        a.push_meta("timestep", self.timestep);
        a.push_meta("mu_f", self.stats.mu_f.to_bits());
        a.push_meta("sigma_f", self.stats.sigma_f.to_bits());
        a.push_meta("stats_samples", self.stats.sample_count);
        let p = self.policy.to_archive();
        a.push_meta("policy_hidden", p.meta("hidden").unwrap_or(""));
        a.push_tensor("policy", &self.policy.layers.params);
        let pr = self.predictor.to_archive();
        a.push_meta("predictor_layers", pr.meta("layers").unwrap_or(""));
        for (name, values) in &pr.tensors {
            a.push_tensor(&format!("predictor.{name}"), values);
        }
        match &self.optimizer {
            Optimizer::Adam(adam) => {
                a.push_meta("optimizer", "adam");
                a.push_meta("adam_t", adam.t);
                a.push_tensor("adam_m", &adam.m);
                a.push_tensor("adam_v", &adam.v);
            }
            Optimizer::Sgd { .. } => a.push_meta("optimizer", "sgd"),
        }
        let feats: Vec<f64> = self.window.iter().flat_map(|t| t.features).collect();
        let labels: Vec<f64> = self.window.iter().map(|t| f64::from(u8::from(t.success))).collect();
        a.push_tensor("window_features", &feats);
        a.push_tensor("window_labels", &labels);
        a
    }

    pub fn from_archive(a: &TensorArchive, ppo: &PpoConfig) -> Result<Self> {
        a.expect_kind("train-state")?;
        let mut pa = TensorArchive::new("policy");
        pa.push_meta("obs_dim", OBS_DIM);
        pa.push_meta("hidden", a.meta("policy_hidden")?);
        pa.push_meta("actions", super::ACTIONS);
        pa.push_tensor("params", a.tensor("policy")?);
        let policy = Policy::from_archive(&pa)?;
        if policy.hidden != ppo.hidden {
            return Err(Error::Config("state file was written with a different policy architecture".into()));
        }
        let mut pr = TensorArchive::new("predictor");
        pr.push_meta("layers", a.meta("predictor_layers")?);
        for name in ["params", "feature_mean", "feature_std"] {
            pr.push_tensor(name, a.tensor(&format!("predictor.{name}"))?);
        }
        let predictor = Predictor::from_archive(&pr)?;
        let optimizer = match (a.meta("optimizer")?, ppo.optimizer) {
            ("adam", super::OptimizerKind::Adam) => {
                let mut adam = Adam::new(policy.layers.len(), ppo.learning_rate);
                adam.t = a.meta_parsed("adam_t")?;
                let (m, v) = (a.tensor("adam_m")?, a.tensor("adam_v")?);
                if m.len() != adam.m.len() || v.len() != adam.v.len() {
                    return Err(Error::parse(0, "optimizer state size mismatch"));
                }
                adam.m.copy_from_slice(m);
                adam.v.copy_from_slice(v);
                Optimizer::Adam(adam)
            }
            ("sgd", super::OptimizerKind::Sgd) => Optimizer::Sgd { lr: ppo.learning_rate },
            _ => return Err(Error::Config("state file was written with a different optimizer".into())),
        };
        let feats = a.tensor("window_features")?;
        let labels = a.tensor("window_labels")?;
        if feats.len() != labels.len() * FEATURE_COUNT {
            return Err(Error::parse(0, "window size mismatch"));
        }
        let window = feats
            .chunks_exact(FEATURE_COUNT)
            .zip(labels)
            .map(|(f, &l)| LabeledTask {
                features: f.try_into().expect("chunk of FEATURE_COUNT"),
                success: l != 0.0,
            })
            .collect();
        let bits = |k: &str| -> Result<f64> { Ok(f64::from_bits(a.meta_parsed(k)?)) };
        Ok(Self {
            epoch: a.meta_parsed("epoch")?,
            timestep: a.meta_parsed("timestep")?,
            policy,
            optimizer,
            predictor,
            stats: DifficultyStats {
                mu_f: bits("mu_f")?,
                sigma_f: bits("sigma_f")?,
                sample_count: a.meta_parsed("stats_samples")?,
            },
            window,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: Policy,
    pub predictor: Predictor,
    pub metrics: Vec<MetricsRow>,
    pub curriculum_log: Vec<CurriculumLogRow>,
    pub validation_tasks: Vec<SceneTask>,
    pub final_validation: EvalReport,
}

/// Output layout of a training run directory.
pub struct RunPaths {
    pub root: PathBuf,
}

impl RunPaths {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }
    pub fn metrics(&self) -> PathBuf {
        self.root.join("metrics.csv")
    }
    pub fn curriculum(&self) -> PathBuf {
        self.root.join("curriculum.csv")
    }
    pub fn eval_report(&self) -> PathBuf {
        self.root.join("eval_report.csv")
    }
    pub fn state(&self) -> PathBuf {
        self.root.join("state.ckpt")
    }
    pub fn policy(&self) -> PathBuf {
        self.root.join("policy.ckpt")
    }
    pub fn predictor(&self) -> PathBuf {
        self.root.join("predictor.ckpt")
    }
    /// The predictor that served tasks during `epoch`.
    pub fn predictor_snapshot(&self, epoch: u64) -> PathBuf {
        self.root.join("predictors").join(format!("epoch_{epoch:04}.ckpt"))
    }
}

/// Fixed validation set: tasks assigned round-robin to the validation scenes.
pub fn validation_task_set(seed: u64, scenes: &[Scene], n: usize, constraints: &TaskConstraints) -> Result<Vec<SceneTask>> {
    let mut rng = stream_rng(seed, Stream::Validation, 0, 0);
    (0..n)
        .map(|k| {
            let scene = k % scenes.len();
            sample_random_task(&scenes[scene], &mut rng, constraints).map(|task| SceneTask { scene, task })
        })
        .collect()
}

fn initial_state(cfg: &TrainConfig, scenes: &[Scene]) -> Result<TrainState> {
    let mut rng = stream_rng(cfg.seed, Stream::Normalization, 0, 0);
    let mut samples = Vec::with_capacity(cfg.normalization_samples);
    for _ in 0..cfg.normalization_samples {
        let scene = &scenes[rng.random_range(0..scenes.len())];
        let task = sample_random_task(scene, &mut rng, &cfg.constraints)?;
        samples.push(compute_features(scene, &task, &cfg.constraints)?);
    }
    let predictor = Predictor {
        mlp: init_predictor(cfg.seed),
        feature_stats: FeatureStats::fit(&samples),
    };
    let stats = fit_difficulty_stats(
        &predictor,
        scenes,
        &cfg.constraints,
        &mut stream_rng(cfg.seed, Stream::Stats, 0, 0),
        cfg.stats_samples,
    )?;
    let policy = Policy::new(OBS_DIM, &cfg.ppo.hidden, &mut stream_rng(cfg.seed, Stream::Init, 1, 0));
    let optimizer = Optimizer::new(cfg.ppo.optimizer, policy.layers.len(), cfg.ppo.learning_rate);
    Ok(TrainState {
        epoch: 0,
        timestep: 0,
        policy,
        optimizer,
        predictor,
        stats,
        window: VecDeque::new(),
    })
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Runs the loop until `total_timesteps` environment steps have been taken.
///
/// With `out` set, every epoch atomically rewrites the CSV logs, the latest
/// policy and predictor, a snapshot of the serving predictor, and finally the
/// state file. An existing state file in `out` is resumed from.
pub fn train(
    cfg: &TrainConfig,
    train_scenes: &[Scene],
    validation_scenes: &[Scene],
    out: Option<&Path>,
    progress: &mut dyn FnMut(&MetricsRow),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_scenes.is_empty() || validation_scenes.is_empty() {
        return Err(Error::Config("training and validation scene sets must be non-empty".into()));
    }
    let paths = out.map(RunPaths::new);
    let validation = validation_task_set(cfg.seed, validation_scenes, cfg.validation_tasks, &cfg.constraints)?;

    let mut metrics = Vec::new();
    let mut log = Vec::new();
    let resumed = match &paths {
        Some(p) if p.state().exists() => {
            let st = TrainState::from_archive(&TensorArchive::load(&p.state())?, &cfg.ppo)?;
            metrics = parse_metrics_csv(&read_to_string(&p.metrics())?)?;
            metrics.retain(|r| r.epoch < st.epoch);
            log = parse_curriculum_csv(&read_to_string(&p.curriculum())?)?;
            log.retain(|r| r.epoch < st.epoch);
            Some(st)
        }
        _ => None,
    };
    let mut st = match resumed {
        Some(s) => s,
        None => initial_state(cfg, train_scenes)?,
    };
    let mut last_validation = None;

    while st.timestep < cfg.total_timesteps {
        let epoch = st.epoch;
        let serving = st.predictor.clone();
        let ctx = RolloutContext {
            scenes: train_scenes,
            constraints: &cfg.constraints,
            reward: &cfg.reward,
            curriculum: &cfg.curriculum,
            predictor: &serving,
            stats: &st.stats,
            global_seed: cfg.seed,
            epoch,
            timestep: st.timestep,
        };
        let buffer = collect_rollouts(&st.policy, &ctx, &cfg.ppo)?;

        let batch = buffer.to_update_batch(cfg.ppo.discount, cfg.ppo.gae_lambda);
        let mut update_rng = stream_rng(cfg.seed, Stream::Update, epoch, 0);
        let (diag, update_ok) = match ppo_update(&mut st.policy, &batch, &cfg.ppo, &mut st.optimizer, &mut update_rng) {
            Ok(d) => (d, true),
            Err(Error::NonFiniteLoss { stage, loss }) => {
                eprintln!("epoch {epoch}: {stage} loss {loss} is not finite; update skipped");
                (UpdateDiagnostics::default(), false)
            }
            Err(e) => return Err(e),
        };

        for ep in &buffer.episodes {
            if st.window.len() == cfg.predictor_window {
                st.window.pop_front();
            }
            st.window.push_back(LabeledTask {
                features: normalize_features(&ep.served.features, &st.predictor.feature_stats),
                success: ep.success,
            });
        }
        let window: Vec<LabeledTask> = st.window.iter().cloned().collect();
        let losses = train_predictor(
            &mut st.predictor.mlp,
            &window,
            &cfg.predictor,
            &mut stream_rng(cfg.seed, Stream::Predictor, epoch, 0),
        )?;
        let serving_stats = st.stats;
        st.stats = fit_difficulty_stats(
            &st.predictor,
            train_scenes,
            &cfg.constraints,
            &mut stream_rng(cfg.seed, Stream::Stats, epoch + 1, 0),
            cfg.stats_samples,
        )?;

        let epoch_start = st.timestep;
        st.timestep += buffer.len() as u64;
        st.epoch += 1;

        let validate_now = st.epoch % cfg.eval_every == 0 || st.timestep >= cfg.total_timesteps;
        let val = if validate_now {
            let report = evaluate(
                &st.policy,
                validation_scenes,
                &validation,
                1,
                &cfg.reward,
                &cfg.constraints,
                mix_seed(&[cfg.seed, st.epoch]),
            )?;
            let v = (report.aggregate.success_mean, report.aggregate.spl_mean);
            last_validation = Some(report);
            Some(v)
        } else {
            None
        };

        let outcomes: Vec<PathOutcome> = buffer
            .episodes
            .iter()
            .map(|e| PathOutcome {
                success: e.success,
                path_length: e.path_length,
                shortest_path: e.shortest_path,
            })
            .collect();
        let n = buffer.episodes.len() as f64;
        let curriculum_geo: Vec<f64> = buffer
            .episodes
            .iter()
            .filter(|e| e.served.task_type != TaskType::Random)
            .map(|e| e.served.features.geodesic_distance)
            .collect();
        let row = MetricsRow {
            epoch,
            timesteps: st.timestep,
            episodes: buffer.episodes.len(),
            success_rate: success_rate(&outcomes)?,
            spl: spl(&outcomes)?,
            mean_reward: buffer.episodes.iter().map(|e| e.total_reward).sum::<f64>() / n,
            policy_loss: diag.policy_loss,
            value_loss: diag.value_loss,
            entropy: diag.entropy,
            clip_fraction: diag.clip_fraction,
            approx_kl: diag.approx_kl,
            update_ok,
            predictor_loss: *losses.last().expect("at least one predictor epoch"),
            mu_f: serving_stats.mu_f,
            sigma_f: serving_stats.sigma_f,
            fallback_rate: buffer.episodes.iter().filter(|e| e.served.fallback).count() as f64 / n,
            mean_geodesic: buffer.episodes.iter().map(|e| e.served.features.geodesic_distance).sum::<f64>() / n,
            curriculum_geodesic: (!curriculum_geo.is_empty())
                .then(|| curriculum_geo.iter().sum::<f64>() / curriculum_geo.len() as f64),
            val_success: val.map(|v| v.0),
            val_spl: val.map(|v| v.1),
        };
        progress(&row);
        metrics.push(row);
        log.extend(buffer.episodes.iter().map(|e| CurriculumLogRow {
            epoch,
            timestep: epoch_start,
            worker: e.worker,
            scene: e.served.scene_index,
            task_type: e.served.task_type,
            task: e.served.task,
            features: e.served.features.to_array(),
            predicted_success: e.served.predicted_success,
            mu_f: serving_stats.mu_f,
            sigma_f: serving_stats.sigma_f,
            attempts: e.served.attempts,
            fallback: e.served.fallback,
            success: e.success,
        }));

        if let Some(p) = &paths {
            serving.to_archive().save(&p.predictor_snapshot(epoch))?;
            write_atomic(&p.metrics(), write_metrics_csv(&metrics).as_bytes())?;
            write_atomic(&p.curriculum(), write_curriculum_csv(&log)?.as_bytes())?;
            st.policy.to_archive().save(&p.policy())?;
            st.predictor.to_archive().save(&p.predictor())?;
            if let Some(r) = &last_validation {
                if validate_now {
                    write_atomic(&p.eval_report(), r.to_csv().as_bytes())?;
                }
            }
            st.to_archive().save(&p.state())?;
        }
    }

    let final_validation = match last_validation {
        Some(r) => r,
        // Resumed after the last epoch had already completed.
        None => evaluate(
            &st.policy,
            validation_scenes,
            &validation,
            1,
            &cfg.reward,
            &cfg.constraints,
            mix_seed(&[cfg.seed, st.epoch]),
        )?,
    };
    Ok(TrainOutcome {
        policy: st.policy,
        predictor: st.predictor,
        metrics,
        curriculum_log: log,
        validation_tasks: validation,
        final_validation,
    })
}
