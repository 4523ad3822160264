//! Experiment configuration files.
//!
//! ```text
//! # comment
//! [section]
//! key = value
//! ```
//!
//! Lists are whitespace separated. Unknown sections and keys are errors;
//! missing keys keep their defaults. [`ExperimentConfig::render`] writes every
//! key, so a rendered file documents the full resolved configuration.

use std::path::PathBuf;

use crate::curriculum::{CurriculumConfig, CurriculumMode, Schedule};
use crate::error::{Error, Result};
use crate::ppo::train::TrainConfig;
use crate::ppo::{OptimizerKind, PpoConfig};
use crate::world::GenConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub train_scene_seeds: Vec<u64>,
    pub validation_scene_seeds: Vec<u64>,
    pub test_scene_seeds: Vec<u64>,
    pub eval_trials: usize,
    pub generation: GenConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("runs/default"),
            train_scene_seeds: vec![1, 2, 3, 4, 5],
            validation_scene_seeds: vec![101, 102],
            test_scene_seeds: vec![201, 202, 203],
            eval_trials: 10,
            generation: GenConfig {
                clutter_density: 0.05,
                ..GenConfig::default()
            },
            train: TrainConfig::default(),
        }
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

fn parse_list<T: std::str::FromStr>(v: &str, key: &str) -> Result<Vec<T>> {
    v.split_whitespace()
        .map(|s| s.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{s}`"))))
        .collect()
}

fn parse_n<T: std::str::FromStr + Copy, const N: usize>(v: &str, key: &str) -> Result<[T; N]> {
    let xs: Vec<T> = parse_list(v, key)?;
    xs.try_into()
        .map_err(|_| Error::Config(format!("`{key}` expects {N} values")))
}

fn parse_one<T: std::str::FromStr>(v: &str, key: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.generation.validate()?;
        self.train.validate()?;
        if self.train_scene_seeds.is_empty() || self.validation_scene_seeds.is_empty() {
            return Err(Error::Config("train and validation scene seed lists must be non-empty".into()));
        }
        let sets = [
            ("train", &self.train_scene_seeds),
            ("validation", &self.validation_scene_seeds),
            ("test", &self.test_scene_seeds),
        ];
        for (i, (na, a)) in sets.iter().enumerate() {
            for (nb, b) in &sets[i + 1..] {
                if let Some(s) = a.iter().find(|s| b.contains(s)) {
                    return Err(Error::Config(format!("scene seed {s} appears in both {na} and {nb} sets")));
                }
            }
        }
        if self.eval_trials == 0 {
            return Err(Error::Config("eval_trials must be positive".into()));
        }
        if (self.generation.agent_radius - self.train.reward.agent_radius).abs() > 0.0 {
            return Err(Error::Config("generation and reward agent radii differ".into()));
        }
        Ok(())
    }

    /// The training loop parameters with the experiment seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn render(&self) -> String {
        let t = &self.train;
        let g = &self.generation;
        let p = &t.ppo;
        let c = &t.curriculum;
        let r = &t.reward;
        let k = &t.constraints;
        let pr = &t.predictor;
        let mut s = String::new();
        let mut line = |text: String| {
            s.push_str(&text);
            s.push('\n');
        };
        line("[experiment]".into());
        line(format!("seed = {}", self.seed));
        line(format!("output_dir = {}", self.output_dir.display()));
        line(format!("total_timesteps = {}", t.total_timesteps));
        line("# validate every this many training epochs".into());
        line(format!("eval_every = {}", t.eval_every));
        line(format!("validation_tasks = {}", t.validation_tasks));
        line(format!("eval_trials = {}", self.eval_trials));
        line(String::new());
        line("[scenes]".into());
        line(format!("train_seeds = {}", join(&self.train_scene_seeds)));
        line(format!("validation_seeds = {}", join(&self.validation_scene_seeds)));
        line(format!("test_seeds = {}", join(&self.test_scene_seeds)));
        line(String::new());
        line("[generation]".into());
        line(format!("scene_extent = {}", g.scene_extent));
        line(format!("cell_size = {}", g.cell_size));
        line(format!("room_count = {} {}", g.room_count.0, g.room_count.1));
        line(format!("room_size = {} {}", g.room_size.0, g.room_size.1));
        line(format!("corridor_width = {} {}", g.corridor_width.0, g.corridor_width.1));
        line(format!("clutter_density = {}", g.clutter_density));
        line(format!("agent_radius = {}", g.agent_radius));
        line(String::new());
        line("[task]".into());
        line(format!("max_task_distance = {}", k.max_task_distance));
        line(format!("min_task_distance = {}", k.min_task_distance));
        line(format!("max_attempts = {}", k.max_attempts));
        line(String::new());
        line("[reward]".into());
        line("# δ, weight of the collision and exploration terms".into());
        line(format!("delta = {}", r.delta));
        line(format!("exploration_radius = {}", r.exploration_radius));
        line(format!("success_radius = {}", r.success_radius));
        line(format!("max_steps = {}", r.max_steps));
        line(String::new());
        line("[ppo]".into());
        line("# Learning Rate".into());
        line(format!("learning_rate = {}", p.learning_rate));
        line("# Clipping Range (ε)".into());
        line(format!("clip_range = {}", p.clip_range));
        line("# Discount (γ)".into());
        line(format!("discount = {}", p.discount));
        line("# Value Function Coefficient (c1)".into());
        line(format!("value_coef = {}", p.value_coef));
        line("# Entropy Coefficient (c2)".into());
        line(format!("entropy_coef = {}", p.entropy_coef));
        line("# Timesteps per Update".into());
        line(format!("timesteps_per_update = {}", p.timesteps_per_update));
        line("# Number of Epochs".into());
        line(format!("inner_epochs = {}", p.inner_epochs));
        line("# Number of Minibatches".into());
        line(format!("minibatches = {}", p.minibatches));
        line("# GAE λ".into());
        line(format!("gae_lambda = {}", p.gae_lambda));
        line("# Rollout Workers".into());
        line(format!("rollout_workers = {}", p.rollout_workers));
        line("# adam | sgd".into());
        line(format!("optimizer = {}", p.optimizer.name()));
        line(format!("hidden = {}", join(&p.hidden)));
        line(String::new());
        line("[curriculum]".into());
        line("# uniform | goid | adaptive".into());
        line(format!("mode = {}", c.mode.name()));
        line("# β, easy threshold in standard deviations above μ_f".into());
        line(format!("beta = {}", c.beta));
        line("# γ, half-width of the frontier band in standard deviations".into());
        line(format!("gamma = {}", c.gamma));
        line(format!("goid_low = {}", c.goid_low));
        line(format!("goid_high = {}", c.goid_high));
        line("# (easy, frontier, random) weights".into());
        line(format!("schedule_start = {}", join(&c.schedule.start)));
        line(format!("schedule_end = {}", join(&c.schedule.end)));
        line(format!("decay_steps = {}", c.schedule.decay_steps));
        line(format!("attempt_cap = {}", c.attempt_cap));
        line(String::new());
        line("[predictor]".into());
        line(format!("learning_rate = {}", pr.learning_rate));
        line(format!("epochs = {}", pr.epochs));
        line(format!("batch_size = {}", pr.batch_size));
        line(format!("window = {}", t.predictor_window));
        line(format!("stats_samples = {}", t.stats_samples));
        line(format!("normalization_samples = {}", t.normalization_samples));
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let n = n + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {n}: expected `key = value`")))?;
            let (key, value) = (key.trim(), value.trim());
            cfg.set(&section, key, value)
                .map_err(|e| Error::Config(format!("line {n}: {}", e.to_string().trim_start_matches("invalid configuration: "))))?;
        }
        cfg.generation.agent_radius = cfg.train.reward.agent_radius;
        cfg.train.constraints.agent_radius = cfg.train.reward.agent_radius;
        Ok(cfg)
    }

    fn set(&mut self, section: &str, key: &str, v: &str) -> Result<()> {
        let t = &mut self.train;
        let id = format!("{section}.{key}");
        match (section, key) {
            ("experiment", "seed") => self.seed = parse_one(v, &id)?,
            ("experiment", "output_dir") => self.output_dir = PathBuf::from(v),
            ("experiment", "total_timesteps") => t.total_timesteps = parse_one(v, &id)?,
            ("experiment", "eval_every") => t.eval_every = parse_one(v, &id)?,
            ("experiment", "validation_tasks") => t.validation_tasks = parse_one(v, &id)?,
            ("experiment", "eval_trials") => self.eval_trials = parse_one(v, &id)?,
            ("scenes", "train_seeds") => self.train_scene_seeds = parse_list(v, &id)?,
            ("scenes", "validation_seeds") => self.validation_scene_seeds = parse_list(v, &id)?,
            ("scenes", "test_seeds") => self.test_scene_seeds = parse_list(v, &id)?,
            ("generation", "scene_extent") => self.generation.scene_extent = parse_one(v, &id)?,
            ("generation", "cell_size") => self.generation.cell_size = parse_one(v, &id)?,
            ("generation", "room_count") => {
                let [a, b] = parse_n(v, &id)?;
                self.generation.room_count = (a, b);
            }
            ("generation", "room_size") => {
                let [a, b] = parse_n(v, &id)?;
                self.generation.room_size = (a, b);
            }
            ("generation", "corridor_width") => {
                let [a, b] = parse_n(v, &id)?;
                self.generation.corridor_width = (a, b);
            }
            ("generation", "clutter_density") => self.generation.clutter_density = parse_one(v, &id)?,
            ("generation", "agent_radius") => t.reward.agent_radius = parse_one(v, &id)?,
            ("task", "max_task_distance") => t.constraints.max_task_distance = parse_one(v, &id)?,
            ("task", "min_task_distance") => t.constraints.min_task_distance = parse_one(v, &id)?,
            ("task", "max_attempts") => t.constraints.max_attempts = parse_one(v, &id)?,
            ("reward", "delta") => t.reward.delta = parse_one(v, &id)?,
            ("reward", "exploration_radius") => t.reward.exploration_radius = parse_one(v, &id)?,
            ("reward", "success_radius") => t.reward.success_radius = parse_one(v, &id)?,
            ("reward", "max_steps") => t.reward.max_steps = parse_one(v, &id)?,
            ("ppo", _) => set_ppo(&mut t.ppo, key, v, &id)?,
            ("curriculum", _) => set_curriculum(&mut t.curriculum, key, v, &id)?,
            ("predictor", "learning_rate") => t.predictor.learning_rate = parse_one(v, &id)?,
            ("predictor", "epochs") => t.predictor.epochs = parse_one(v, &id)?,
            ("predictor", "batch_size") => t.predictor.batch_size = parse_one(v, &id)?,
            ("predictor", "window") => t.predictor_window = parse_one(v, &id)?,
            ("predictor", "stats_samples") => t.stats_samples = parse_one(v, &id)?,
            ("predictor", "normalization_samples") => t.normalization_samples = parse_one(v, &id)?,
            _ => return Err(Error::Config(format!("unknown key `{id}`"))),
        }
        Ok(())
    }
}

fn set_ppo(p: &mut PpoConfig, key: &str, v: &str, id: &str) -> Result<()> {
    match key {
        "learning_rate" => p.learning_rate = parse_one(v, id)?,
        "clip_range" => p.clip_range = parse_one(v, id)?,
        "discount" => p.discount = parse_one(v, id)?,
        "value_coef" => p.value_coef = parse_one(v, id)?,
        "entropy_coef" => p.entropy_coef = parse_one(v, id)?,
        "timesteps_per_update" => p.timesteps_per_update = parse_one(v, id)?,
        "inner_epochs" => p.inner_epochs = parse_one(v, id)?,
        "minibatches" => p.minibatches = parse_one(v, id)?,
        "gae_lambda" => p.gae_lambda = parse_one(v, id)?,
        "rollout_workers" => p.rollout_workers = parse_one(v, id)?,
        "optimizer" => p.optimizer = v.parse::<OptimizerKind>()?,
        "hidden" => p.hidden = parse_list(v, id)?,
        _ => return Err(Error::Config(format!("unknown key `{id}`"))),
    }
    Ok(())
}

fn set_curriculum(c: &mut CurriculumConfig, key: &str, v: &str, id: &str) -> Result<()> {
    let s: &mut Schedule = &mut c.schedule;
    match key {
        "mode" => c.mode = v.parse::<CurriculumMode>()?,
        "beta" => c.beta = parse_one(v, id)?,
        "gamma" => c.gamma = parse_one(v, id)?,
        "goid_low" => c.goid_low = parse_one(v, id)?,
        "goid_high" => c.goid_high = parse_one(v, id)?,
        "schedule_start" => s.start = parse_n(v, id)?,
        "schedule_end" => s.end = parse_n(v, id)?,
        "decay_steps" => s.decay_steps = parse_one(v, id)?,
        "attempt_cap" => c.attempt_cap = parse_one(v, id)?,
        _ => return Err(Error::Config(format!("unknown key `{id}`"))),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = ExperimentConfig::default();
        assert!(c.validate().is_ok());
        assert_eq!(ExperimentConfig::parse(&c.render()).unwrap(), c);
    }

    #[test]
    fn overrides_and_errors() {
        let c = ExperimentConfig::parse("[curriculum]\nmode = goid\n[ppo]\nhidden = 32 16\n").unwrap();
        assert_eq!(c.train.curriculum.mode, CurriculumMode::Goid);
        assert_eq!(c.train.ppo.hidden, vec![32, 16]);
        assert!(ExperimentConfig::parse("[ppo]\nbogus = 1\n").is_err());
        assert!(ExperimentConfig::parse("[ppo]\nclip_range\n").is_err());
        assert!(ExperimentConfig::parse("[curriculum]\nschedule_start = 1 2\n").is_err());
        let overlap = ExperimentConfig::parse("[scenes]\ntrain_seeds = 1 2\ntest_seeds = 2\n").unwrap();
        assert!(overlap.validate().is_err());
    }
}
