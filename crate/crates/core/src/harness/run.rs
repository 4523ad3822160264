//! Experiment orchestration: single training runs, evaluation of saved
//! policies, and mode ablations.

use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::io::write_atomic;
use super::svg::{line_chart, Series};
use crate::curriculum::CurriculumMode;
use crate::error::{Error, Result};
use crate::metrics::{curriculum_diagnostics, diagnostics_csv, evaluate, mean_std, EvalReport, SceneTask};
use crate::ppo::train::{train, MetricsRow, RunPaths, TrainOutcome};
use crate::ppo::Policy;
use crate::checkpoint::TensorArchive;
use crate::seeding::{stream_rng, Stream};
use crate::world::{generate_scene, sample_random_task, GenConfig, Scene};

pub fn generate_scenes(seeds: &[u64], cfg: &GenConfig) -> Result<Vec<Scene>> {
    seeds.iter().map(|&s| generate_scene(s, cfg)).collect()
}

/// Trains one configuration into `cfg.output_dir`, resuming if a state file
/// from the same configuration exists there.
pub fn run_training(cfg: &ExperimentConfig, progress: &mut dyn FnMut(&MetricsRow)) -> Result<TrainOutcome> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    let paths = RunPaths::new(dir);
    let rendered = cfg.render();
    let config_path = dir.join("config.ini");
    if paths.state().exists() {
        let saved = std::fs::read_to_string(&config_path).map_err(|e| Error::io(&config_path, e))?;
        if saved != rendered {
            return Err(Error::Config(format!(
                "{} holds a run with a different configuration; choose another output_dir",
                dir.display()
            )));
        }
    }
    write_atomic(&config_path, rendered.as_bytes())?;
    let train_scenes = generate_scenes(&cfg.train_scene_seeds, &cfg.generation)?;
    let val_scenes = generate_scenes(&cfg.validation_scene_seeds, &cfg.generation)?;
    let outcome = train(&cfg.train_config(), &train_scenes, &val_scenes, Some(dir), progress)?;

    write_atomic(&paths.eval_report(), outcome.final_validation.to_csv().as_bytes())?;
    let diag = curriculum_diagnostics(&outcome.curriculum_log);
    write_atomic(&dir.join("curriculum_diagnostics.csv"), diagnostics_csv(&diag).as_bytes())?;
    write_metric_plots(&outcome.metrics, dir)?;
    Ok(outcome)
}

/// Fixed evaluation set over `scenes`, independent of the policy.
pub fn evaluation_tasks(cfg: &ExperimentConfig, scenes: &[Scene], per_scene: usize) -> Result<Vec<SceneTask>> {
    let mut tasks = Vec::with_capacity(scenes.len() * per_scene);
    for (k, scene) in scenes.iter().enumerate() {
        let mut rng = stream_rng(cfg.seed, Stream::Evaluation, u64::MAX, k as u64);
        for _ in 0..per_scene {
            tasks.push(SceneTask {
                scene: k,
                task: sample_random_task(scene, &mut rng, &cfg.train.constraints)?,
            });
        }
    }
    Ok(tasks)
}

/// Evaluates a saved policy on the held-out test scenes.
pub fn run_evaluation(cfg: &ExperimentConfig, policy_path: &Path, tasks_per_scene: usize) -> Result<EvalReport> {
    cfg.validate()?;
    if cfg.test_scene_seeds.is_empty() {
        return Err(Error::Config("no test scene seeds configured".into()));
    }
    let policy = Policy::from_archive(&TensorArchive::load(policy_path)?)?;
    let scenes = generate_scenes(&cfg.test_scene_seeds, &cfg.generation)?;
    let tasks = evaluation_tasks(cfg, &scenes, tasks_per_scene)?;
    evaluate(
        &policy,
        &scenes,
        &tasks,
        cfg.eval_trials,
        &cfg.train.reward,
        &cfg.train.constraints,
        cfg.seed,
    )
}

/// Plot-ready columns of `metrics.csv`.
pub const PLOTTED_COLUMNS: [&str; 8] = [
    "success_rate",
    "val_success",
    "spl",
    "mean_reward",
    "mean_geodesic",
    "curriculum_geodesic",
    "predictor_loss",
    "entropy",
];

pub fn metric_column(row: &MetricsRow, name: &str) -> Option<f64> {
    Some(match name {
        "success_rate" => row.success_rate,
        "spl" => row.spl,
        "mean_reward" => row.mean_reward,
        "policy_loss" => row.policy_loss,
        "value_loss" => row.value_loss,
        "entropy" => row.entropy,
        "clip_fraction" => row.clip_fraction,
        "approx_kl" => row.approx_kl,
        "predictor_loss" => row.predictor_loss,
        "mu_f" => row.mu_f,
        "sigma_f" => row.sigma_f,
        "fallback_rate" => row.fallback_rate,
        "mean_geodesic" => row.mean_geodesic,
        "curriculum_geodesic" => row.curriculum_geodesic?,
        "val_success" => row.val_success?,
        "val_spl" => row.val_spl?,
        _ => return None,
    })
}

/// One SVG per column, plotted against environment steps.
pub fn write_metric_plots(rows: &[MetricsRow], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for col in PLOTTED_COLUMNS {
        let points: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| metric_column(r, col).map(|v| (r.timesteps as f64, v)))
            .collect();
        let svg = line_chart(col, "environment steps", col, &[Series::new(col, points)]);
        let path = dir.join(format!("{col}.svg"));
        write_atomic(&path, svg.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// Validation curve of one mode, averaged over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCurve {
    pub mode: CurriculumMode,
    /// `(mean timesteps, success mean, success std, spl mean, spl std)`.
    pub points: Vec<(f64, f64, f64, f64, f64)>,
    /// Final validation success per seed.
    pub final_success: Vec<f64>,
    pub final_spl: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AblationReport {
    pub curves: Vec<ModeCurve>,
    pub runs: Vec<(CurriculumMode, u64, TrainOutcome)>,
}

impl AblationReport {
    pub fn curve(&self, mode: CurriculumMode) -> Option<&ModeCurve> {
        self.curves.iter().find(|c| c.mode == mode)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,point,timesteps,success_mean,success_std,spl_mean,spl_std\n");
        for c in &self.curves {
            for (k, p) in c.points.iter().enumerate() {
                out.push_str(&format!("{},{k},{},{},{},{},{}\n", c.mode.name(), p.0, p.1, p.2, p.3, p.4));
            }
        }
        out
    }

    pub fn final_csv(&self) -> String {
        let mut out = String::from("mode,seeds,final_success_mean,final_success_std,final_spl_mean,final_spl_std\n");
        for c in &self.curves {
            let (sm, ss) = mean_std(&c.final_success);
            let (pm, ps) = mean_std(&c.final_spl);
            out.push_str(&format!("{},{},{sm},{ss},{pm},{ps}\n", c.mode.name(), c.final_success.len()));
        }
        out
    }
}

/// Aligns validation points by epoch: a point is kept when every run
/// validated at that epoch. Each run's final validation is always the last
/// point.
fn mode_curve(mode: CurriculumMode, runs: &[&TrainOutcome]) -> ModeCurve {
    let val_rows = |o: &TrainOutcome| -> Vec<MetricsRow> { o.metrics.iter().filter(|r| r.val_success.is_some()).cloned().collect() };
    let per_run: Vec<Vec<MetricsRow>> = runs.iter().map(|o| val_rows(o)).collect();
    let mut epochs: Vec<u64> = per_run.first().map(|r| r.iter().map(|m| m.epoch).collect()).unwrap_or_default();
    epochs.retain(|e| per_run.iter().all(|rows| rows[..rows.len().saturating_sub(1)].iter().any(|m| m.epoch == *e)));
    let point = |rows: Vec<&MetricsRow>| {
        let t: Vec<f64> = rows.iter().map(|r| r.timesteps as f64).collect();
        let s: Vec<f64> = rows.iter().map(|r| r.val_success.unwrap_or(f64::NAN)).collect();
        let p: Vec<f64> = rows.iter().map(|r| r.val_spl.unwrap_or(f64::NAN)).collect();
        let (sm, ss) = mean_std(&s);
        let (pm, ps) = mean_std(&p);
        (mean_std(&t).0, sm, ss, pm, ps)
    };
    let mut points: Vec<_> = epochs
        .iter()
        .map(|e| point(per_run.iter().map(|rows| rows.iter().find(|m| m.epoch == *e).unwrap()).collect()))
        .collect();
    if per_run.iter().all(|r| !r.is_empty()) {
        points.push(point(per_run.iter().map(|r| r.last().unwrap()).collect()));
    }
    ModeCurve {
        mode,
        points,
        final_success: runs.iter().map(|o| o.final_validation.aggregate.success_mean).collect(),
        final_spl: runs.iter().map(|o| o.final_validation.aggregate.spl_mean).collect(),
    }
}

/// Trains every `(mode, seed)` pair under `base.output_dir/<mode>/seed_<s>`
/// and writes `ablation.csv`, `ablation_final.csv` and `ablation.svg`.
pub fn ablate(
    base: &ExperimentConfig,
    modes: &[CurriculumMode],
    seeds: &[u64],
    progress: &mut dyn FnMut(CurriculumMode, u64, &MetricsRow),
) -> Result<AblationReport> {
    if modes.is_empty() || seeds.is_empty() {
        return Err(Error::Config("ablation needs at least one mode and one seed".into()));
    }
    let mut runs = Vec::new();
    for &mode in modes {
        for &seed in seeds {
            let mut cfg = base.clone();
            cfg.seed = seed;
            cfg.train.curriculum.mode = mode;
            cfg.output_dir = base.output_dir.join(mode.name()).join(format!("seed_{seed}"));
            let outcome = run_training(&cfg, &mut |row| progress(mode, seed, row))?;
            runs.push((mode, seed, outcome));
        }
    }
    let curves = modes
        .iter()
        .map(|&m| {
            let rs: Vec<&TrainOutcome> = runs.iter().filter(|r| r.0 == m).map(|r| &r.2).collect();
            mode_curve(m, &rs)
        })
        .collect();
    let report = AblationReport { curves, runs };
    let dir = &base.output_dir;
    write_atomic(&dir.join("ablation.csv"), report.to_csv().as_bytes())?;
    write_atomic(&dir.join("ablation_final.csv"), report.final_csv().as_bytes())?;
    let series: Vec<Series> = report
        .curves
        .iter()
        .map(|c| Series {
            label: c.mode.name().to_string(),
            points: c.points.iter().map(|p| (p.0, p.1)).collect(),
            band: Some(c.points.iter().map(|p| p.2).collect()),
        })
        .collect();
    let svg = line_chart("validation success", "environment steps", "success rate", &series);
    write_atomic(&dir.join("ablation.svg"), svg.as_bytes())?;
    Ok(report)
}
