//! Task selection: uniform sampling, goals of intermediate difficulty (GOID)
//! and the adaptive easy/frontier/random mixture.
//!
//! Every selector draws uniform random tasks and filters them through the
//! success predictor. Filters give up after `attempt_cap` rejected draws and
//! serve the last drawn task, flagged as a fallback.

use rand::Rng;

use crate::error::{Error, Result};
use crate::features::{features_with_geodesic, TaskFeatures};
use crate::predictor::{DifficultyStats, Predictor};
use crate::world::{sample::sample_random_task_with_distance, Scene, Task, TaskConstraints};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurriculumMode {
    Uniform,
    Goid,
    Adaptive,
}

impl CurriculumMode {
    pub const ALL: [CurriculumMode; 3] = [CurriculumMode::Uniform, CurriculumMode::Goid, CurriculumMode::Adaptive];

    pub fn name(self) -> &'static str {
        match self {
            CurriculumMode::Uniform => "uniform",
            CurriculumMode::Goid => "goid",
            CurriculumMode::Adaptive => "adaptive",
        }
    }
}

impl std::str::FromStr for CurriculumMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown curriculum mode `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskType {
    Easy,
    Frontier,
    Random,
    /// Served by the fixed-band intermediate-difficulty filter.
    Goid,
}

impl TaskType {
    pub const ALL: [TaskType; 4] = [TaskType::Easy, TaskType::Frontier, TaskType::Random, TaskType::Goid];

    pub fn name(self) -> &'static str {
        match self {
            TaskType::Easy => "easy",
            TaskType::Frontier => "frontier",
            TaskType::Random => "random",
            TaskType::Goid => "goid",
        }
    }
}

impl std::str::FromStr for TaskType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown task type `{s}`")))
    }
}

/// Mixture weights over (easy, frontier, random), linearly interpolated from
/// `start` at t = 0 to `end` at `t = decay_steps`, constant afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub start: [f64; 3],
    pub end: [f64; 3],
    pub decay_steps: u64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            start: [0.4, 0.4, 0.2],
            end: [0.0, 0.0, 1.0],
            decay_steps: 150_000,
        }
    }
}

impl Schedule {
    pub fn weights(&self, t: u64) -> [f64; 3] {
        let frac = if self.decay_steps == 0 {
            1.0
        } else {
            (t as f64 / self.decay_steps as f64).min(1.0)
        };
        let mut w = [0.0; 3];
        for k in 0..3 {
            w[k] = (self.start[k] + (self.end[k] - self.start[k]) * frac).max(0.0);
        }
        let total: f64 = w.iter().sum();
        w.map(|v| v / total)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |w: &[f64; 3]| w.iter().all(|v| v.is_finite() && *v >= 0.0) && w.iter().sum::<f64>() > 0.0;
        if !ok(&self.start) || !ok(&self.end) {
            return Err(Error::Config("schedule weights must be non-negative with a positive sum".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumConfig {
    pub mode: CurriculumMode,
    pub beta: f64,
    pub gamma: f64,
    pub goid_low: f64,
    pub goid_high: f64,
    pub schedule: Schedule,
    pub attempt_cap: u32,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            mode: CurriculumMode::Adaptive,
            beta: 1.0,
            gamma: 0.1,
            goid_low: 0.4,
            goid_high: 0.6,
            schedule: Schedule::default(),
            attempt_cap: 100,
        }
    }
}

impl CurriculumConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.goid_low && self.goid_low < self.goid_high && self.goid_high <= 1.0) {
            return Err(Error::Config(format!(
                "GOID band [{}, {}] must satisfy 0 <= low < high <= 1",
                self.goid_low, self.goid_high
            )));
        }
        if !(self.beta > 0.0 && self.gamma > 0.0) {
            return Err(Error::Config("beta and gamma must be positive".into()));
        }
        if self.attempt_cap == 0 {
            return Err(Error::Config("attempt_cap must be positive".into()));
        }
        self.schedule.validate()
    }

    /// Whether a prediction satisfies the filter of `task_type`. Adaptive
    /// bands use strict inequalities, the GOID band is inclusive.
    pub fn accepts(&self, task_type: TaskType, p: f64, stats: &DifficultyStats) -> bool {
        match task_type {
            TaskType::Easy => p > stats.mu_f + self.beta * stats.sigma_f,
            TaskType::Frontier => {
                stats.mu_f - self.gamma * stats.sigma_f < p && p < stats.mu_f + self.gamma * stats.sigma_f
            }
            TaskType::Goid => self.goid_low <= p && p <= self.goid_high,
            TaskType::Random => true,
        }
    }
}

pub fn get_task_type<R: Rng + ?Sized>(t: u64, schedule: &Schedule, rng: &mut R) -> TaskType {
    let w = schedule.weights(t);
    let u: f64 = rng.random();
    if u < w[0] {
        TaskType::Easy
    } else if u < w[0] + w[1] {
        TaskType::Frontier
    } else {
        TaskType::Random
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServedTask {
    pub task: Task,
    pub scene_index: usize,
    pub task_type: TaskType,
    pub features: TaskFeatures,
    pub predicted_success: f64,
    /// The filter never accepted a draw within the attempt cap.
    pub fallback: bool,
    pub attempts: u32,
}

/// Where tasks are drawn from.
pub struct TaskSource<'a> {
    pub scenes: &'a [Scene],
    pub constraints: &'a TaskConstraints,
}

impl TaskSource<'_> {
    fn draw<R: Rng + ?Sized>(&self, predictor: &Predictor, rng: &mut R) -> Result<(usize, Task, TaskFeatures, f64)> {
        let k = if self.scenes.len() > 1 {
            rng.random_range(0..self.scenes.len())
        } else {
            0
        };
        let scene = &self.scenes[k];
        let (task, d) = sample_random_task_with_distance(scene, rng, self.constraints)?;
        let f = features_with_geodesic(scene, &task, d)?;
        Ok((k, task, f, predictor.predict_features(&f)))
    }
}

fn filtered<R: Rng + ?Sized>(
    source: &TaskSource<'_>,
    predictor: &Predictor,
    rng: &mut R,
    task_type: TaskType,
    cap: u32,
    accept: impl Fn(f64) -> bool,
) -> Result<ServedTask> {
    let mut attempts = 0;
    loop {
        attempts += 1;
        let (scene_index, task, features, p) = source.draw(predictor, rng)?;
        let ok = accept(p);
        if ok || attempts >= cap {
            return Ok(ServedTask {
                task,
                scene_index,
                task_type,
                features,
                predicted_success: p,
                fallback: !ok,
                attempts,
            });
        }
    }
}

/// Adaptive selection: samples a task type from the schedule at `t`, then
/// filters random tasks against the band for that type.
pub fn get_dynamic_task<R: Rng + ?Sized>(
    predictor: &Predictor,
    stats: &DifficultyStats,
    source: &TaskSource<'_>,
    rng: &mut R,
    t: u64,
    config: &CurriculumConfig,
) -> Result<ServedTask> {
    let task_type = get_task_type(t, &config.schedule, rng);
    filtered(source, predictor, rng, task_type, config.attempt_cap, |p| {
        config.accepts(task_type, p, stats)
    })
}

/// Fixed-band selection: `goid_low <= f(h) <= goid_high`.
pub fn get_goid_task<R: Rng + ?Sized>(
    predictor: &Predictor,
    source: &TaskSource<'_>,
    rng: &mut R,
    config: &CurriculumConfig,
) -> Result<ServedTask> {
    filtered(source, predictor, rng, TaskType::Goid, config.attempt_cap, |p| {
        config.goid_low <= p && p <= config.goid_high
    })
}

/// Uniform selection; the prediction is recorded for diagnostics only.
pub fn get_uniform_task<R: Rng + ?Sized>(predictor: &Predictor, source: &TaskSource<'_>, rng: &mut R) -> Result<ServedTask> {
    filtered(source, predictor, rng, TaskType::Random, 1, |_| true)
}

/// Dispatches on the configured mode.
pub fn serve_task<R: Rng + ?Sized>(
    predictor: &Predictor,
    stats: &DifficultyStats,
    source: &TaskSource<'_>,
    rng: &mut R,
    t: u64,
    config: &CurriculumConfig,
) -> Result<ServedTask> {
    match config.mode {
        CurriculumMode::Uniform => get_uniform_task(predictor, source, rng),
        CurriculumMode::Goid => get_goid_task(predictor, source, rng, config),
        CurriculumMode::Adaptive => get_dynamic_task(predictor, stats, source, rng, t, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        let s = Schedule::default();
        assert_eq!(s.weights(0), [0.4, 0.4, 0.2]);
        assert_eq!(s.weights(s.decay_steps), [0.0, 0.0, 1.0]);
        assert_eq!(s.weights(10 * s.decay_steps), [0.0, 0.0, 1.0]);
        for t in (0..200_000).step_by(777) {
            assert!((s.weights(t).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn band_predicates() {
        let c = CurriculumConfig::default();
        let st = DifficultyStats {
            mu_f: 0.5,
            sigma_f: 0.1,
            sample_count: 1,
        };
        assert!(c.accepts(TaskType::Easy, 0.61, &st));
        assert!(!c.accepts(TaskType::Easy, 0.6, &st));
        assert!(c.accepts(TaskType::Frontier, 0.505, &st));
        assert!(!c.accepts(TaskType::Frontier, 0.51, &st));
        assert!(c.accepts(TaskType::Goid, 0.4, &st));
        assert!(c.accepts(TaskType::Goid, 0.6, &st));
        assert!(!c.accepts(TaskType::Goid, 0.61, &st));
    }

    #[test]
    fn config_validation() {
        let mut c = CurriculumConfig::default();
        assert!(c.validate().is_ok());
        c.goid_low = 0.7;
        assert!(c.validate().is_err());
        c.goid_low = 0.4;
        c.beta = 0.0;
        assert!(c.validate().is_err());
        assert_eq!("goid".parse::<CurriculumMode>().unwrap(), CurriculumMode::Goid);
        assert!("nope".parse::<CurriculumMode>().is_err());
    }
}
