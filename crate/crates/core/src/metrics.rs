//! Success rate, SPL, evaluation over fixed task sets and curriculum
//! diagnostics.
//!
//! SPL uses the standard numerator: each success contributes `p / max(l, p)`
//! with `p` the shortest-path length and `l` the length actually travelled.
//! Writing `l / max(l, p)` instead would score every success that overshoots
//! the optimum as 1.

use std::io::Write;

use rayon::prelude::*;

use crate::curriculum::TaskType;
use crate::env::{run_episode, EpisodeResult, RewardConfig};
use crate::error::{Error, Result};
use crate::features::{FEATURE_COUNT, FEATURE_NAMES};
use crate::ppo::Policy;
use crate::seeding::{stream_rng, Stream};
use crate::world::{Scene, Task, TaskConstraints};

/// The three numbers SPL needs from an episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    pub success: bool,
    pub path_length: f64,
    pub shortest_path: f64,
}

impl From<&EpisodeResult> for PathOutcome {
    fn from(r: &EpisodeResult) -> Self {
        Self {
            success: r.success,
            path_length: r.path_length,
            shortest_path: r.shortest_path,
        }
    }
}

pub fn spl(episodes: &[PathOutcome]) -> Result<f64> {
    if episodes.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut sum = 0.0;
    for e in episodes {
        if !(e.shortest_path > 0.0) {
            return Err(Error::InvalidTask(format!("shortest path {} must be positive", e.shortest_path)));
        }
        if e.success {
            sum += e.shortest_path / e.path_length.max(e.shortest_path);
        }
    }
    Ok(sum / episodes.len() as f64)
}

pub fn success_rate(episodes: &[PathOutcome]) -> Result<f64> {
    if episodes.is_empty() {
        return Err(Error::EmptyBatch);
    }
    Ok(episodes.iter().filter(|e| e.success).count() as f64 / episodes.len() as f64)
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// A task pinned to a scene of an evaluation set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneTask {
    pub scene: usize,
    pub task: Task,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSummary {
    pub scene: usize,
    pub episodes: usize,
    pub success_mean: f64,
    pub success_std: f64,
    pub spl_mean: f64,
    pub spl_std: f64,
}

/// Statistics over trials: each trial runs the whole task set once, and
/// means/standard deviations are taken across trials.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_scene: Vec<SceneSummary>,
    pub aggregate: SceneSummary,
    pub trials: usize,
    pub seed: u64,
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scene,episodes,success_mean,success_std,spl_mean,spl_std\n");
        let row = |label: String, s: &SceneSummary| {
            format!(
                "{label},{},{},{},{},{}\n",
                s.episodes, s.success_mean, s.success_std, s.spl_mean, s.spl_std
            )
        };
        for s in &self.per_scene {
            out.push_str(&row(s.scene.to_string(), s));
        }
        out.push_str(&row("all".into(), &self.aggregate));
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{} trial(s), seed {}\n", self.trials, self.seed);
        out.push_str(&format!(
            "{:>6} {:>8} {:>16} {:>16}\n",
            "scene", "episodes", "success", "spl"
        ));
        let mut line = |label: &str, s: &SceneSummary| {
            out.push_str(&format!(
                "{label:>6} {:>8} {:>8.3} ± {:<5.3} {:>8.3} ± {:<5.3}\n",
                s.episodes, s.success_mean, s.success_std, s.spl_mean, s.spl_std
            ));
        };
        for s in &self.per_scene {
            line(&s.scene.to_string(), s);
        }
        line("all", &self.aggregate);
        out
    }
}

/// Runs every task once per trial. Episode `(trial, k)` draws its actions from
/// its own stream, so results do not depend on execution order.
pub fn evaluate(
    policy: &Policy,
    scenes: &[Scene],
    tasks: &[SceneTask],
    trials: usize,
    reward: &RewardConfig,
    constraints: &TaskConstraints,
    seed: u64,
) -> Result<EvalReport> {
    if tasks.is_empty() || trials == 0 {
        return Err(Error::EmptyBatch);
    }
    let jobs: Vec<(usize, usize)> = (0..trials).flat_map(|t| (0..tasks.len()).map(move |k| (t, k))).collect();
    let results: Vec<Result<PathOutcome>> = jobs
        .par_iter()
        .map(|&(t, k)| {
            let mut rng = stream_rng(seed, Stream::Evaluation, t as u64, k as u64);
            let st = &tasks[k];
            run_episode(policy, &scenes[st.scene], &st.task, reward, constraints, &mut rng).map(|r| (&r).into())
        })
        .collect();
    let outcomes = results.into_iter().collect::<Result<Vec<_>>>()?;

    let summarize = |scene: usize, filter: &dyn Fn(usize) -> bool| -> Result<SceneSummary> {
        let mut succ = Vec::new();
        let mut spls = Vec::new();
        let mut episodes = 0;
        for t in 0..trials {
            let trial: Vec<PathOutcome> = (0..tasks.len())
                .filter(|&k| filter(k))
                .map(|k| outcomes[t * tasks.len() + k])
                .collect();
            episodes += trial.len();
            succ.push(success_rate(&trial)?);
            spls.push(spl(&trial)?);
        }
        let (success_mean, success_std) = mean_std(&succ);
        let (spl_mean, spl_std) = mean_std(&spls);
        Ok(SceneSummary {
            scene,
            episodes,
            success_mean,
            success_std,
            spl_mean,
            spl_std,
        })
    };

    let mut scene_ids: Vec<usize> = tasks.iter().map(|t| t.scene).collect();
    scene_ids.sort_unstable();
    scene_ids.dedup();
    let per_scene = scene_ids
        .iter()
        .map(|&s| summarize(s, &|k| tasks[k].scene == s))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        per_scene,
        aggregate: summarize(usize::MAX, &|_| true)?,
        trials,
        seed,
    })
}

/// One served task as logged during training.
#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumLogRow {
    pub epoch: u64,
    pub timestep: u64,
    pub worker: usize,
    pub scene: usize,
    pub task_type: TaskType,
    pub task: Task,
    pub features: [f64; FEATURE_COUNT],
    pub predicted_success: f64,
    pub mu_f: f64,
    pub sigma_f: f64,
    pub attempts: u32,
    pub fallback: bool,
    pub success: bool,
}

pub const CURRICULUM_HEADER: [&str; 13] = [
    "epoch",
    "timestep",
    "worker",
    "scene",
    "task_type",
    "start_x",
    "start_y",
    "start_heading",
    "goal_x",
    "goal_y",
    "predicted_success",
    "mu_f",
    "sigma_f",
];
const CURRICULUM_TAIL: [&str; 3] = ["attempts", "fallback", "success"];

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::parse(line, e.to_string())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize, line: usize) -> Result<T> {
    rec.get(k)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(line, format!("invalid field {k}")))
}

fn parse_bool(s: Option<&str>, line: usize) -> Result<bool> {
    match s {
        Some("1") => Ok(true),
        Some("0") => Ok(false),
        _ => Err(Error::parse(line, "expected 0 or 1")),
    }
}

pub fn write_curriculum_csv(rows: &[CurriculumLogRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = CURRICULUM_HEADER.to_vec();
    header.extend(FEATURE_NAMES);
    header.extend(CURRICULUM_TAIL);
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![
            r.epoch.to_string(),
            r.timestep.to_string(),
            r.worker.to_string(),
            r.scene.to_string(),
            r.task_type.name().to_string(),
            r.task.start.x.to_string(),
            r.task.start.y.to_string(),
            r.task.start.heading.to_string(),
            r.task.goal.x.to_string(),
            r.task.goal.y.to_string(),
            r.predicted_success.to_string(),
            r.mu_f.to_string(),
            r.sigma_f.to_string(),
        ];
        rec.extend(r.features.iter().map(f64::to_string));
        rec.push(r.attempts.to_string());
        rec.push(u8::from(r.fallback).to_string());
        rec.push(u8::from(r.success).to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::parse(0, e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::parse(0, e.to_string()))
}

pub fn parse_curriculum_csv(text: &str) -> Result<Vec<CurriculumLogRow>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let width = CURRICULUM_HEADER.len() + FEATURE_COUNT + CURRICULUM_TAIL.len();
    if rd.headers().map_err(csv_err)?.len() != width {
        return Err(Error::parse(1, "unexpected curriculum header"));
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let base = CURRICULUM_HEADER.len();
        let mut features = [0.0; FEATURE_COUNT];
        for (k, f) in features.iter_mut().enumerate() {
            *f = field(&rec, base + k, line)?;
        }
        let tail = base + FEATURE_COUNT;
        rows.push(CurriculumLogRow {
            epoch: field(&rec, 0, line)?,
            timestep: field(&rec, 1, line)?,
            worker: field(&rec, 2, line)?,
            scene: field(&rec, 3, line)?,
            task_type: rec.get(4).unwrap_or("").parse()?,
            task: Task {
                start: crate::world::Pose::new(field(&rec, 5, line)?, field(&rec, 6, line)?, field(&rec, 7, line)?),
                goal: crate::world::Point::new(field(&rec, 8, line)?, field(&rec, 9, line)?),
            },
            predicted_success: field(&rec, 10, line)?,
            mu_f: field(&rec, 11, line)?,
            sigma_f: field(&rec, 12, line)?,
            features,
            attempts: field(&rec, tail, line)?,
            fallback: parse_bool(rec.get(tail + 1), line)?,
            success: parse_bool(rec.get(tail + 2), line)?,
        });
    }
    Ok(rows)
}

/// Per-epoch means of each task feature, split by task type.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRow {
    pub epoch: u64,
    pub task_type: TaskType,
    pub count: usize,
    pub feature_means: [f64; FEATURE_COUNT],
    pub success_rate: f64,
}

pub fn curriculum_diagnostics(log: &[CurriculumLogRow]) -> Vec<DiagnosticRow> {
    let mut out: Vec<DiagnosticRow> = Vec::new();
    let mut epochs: Vec<u64> = log.iter().map(|r| r.epoch).collect();
    epochs.sort_unstable();
    epochs.dedup();
    for e in epochs {
        for tt in TaskType::ALL {
            let rows: Vec<&CurriculumLogRow> = log.iter().filter(|r| r.epoch == e && r.task_type == tt).collect();
            if rows.is_empty() {
                continue;
            }
            let n = rows.len() as f64;
            let mut means = [0.0; FEATURE_COUNT];
            for r in &rows {
                for (m, f) in means.iter_mut().zip(&r.features) {
                    *m += f / n;
                }
            }
            out.push(DiagnosticRow {
                epoch: e,
                task_type: tt,
                count: rows.len(),
                feature_means: means,
                success_rate: rows.iter().filter(|r| r.success).count() as f64 / n,
            });
        }
    }
    out
}

pub fn diagnostics_csv(rows: &[DiagnosticRow]) -> String {
    let mut out = Vec::new();
    write!(out, "epoch,task_type,count,success_rate").unwrap();
    for name in FEATURE_NAMES {
        write!(out, ",{name}").unwrap();
    }
    writeln!(out).unwrap();
    for r in rows {
        write!(out, "{},{},{},{}", r.epoch, r.task_type.name(), r.count, r.success_rate).unwrap();
        for m in r.feature_means {
            write!(out, ",{m}").unwrap();
        }
        writeln!(out).unwrap();
    }
    String::from_utf8(out).expect("ascii")
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, sx) = mean_std(&rx);
    let (my, sy) = mean_std(&ry);
    let cov = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / rx.len() as f64;
    cov / (sx * sy)
}
