//! Command-line interface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::config::ExperimentConfig;
use super::io::write_atomic;
use super::run::{ablate, evaluation_tasks, generate_scenes, metric_column, run_evaluation, run_training, PLOTTED_COLUMNS};
use super::svg::{line_chart, Series};
use crate::checkpoint::TensorArchive;
use crate::curriculum::CurriculumMode;
use crate::env::{run_episode, trajectory_csv};
use crate::error::{Error, Result};
use crate::features::{compute_features, FEATURE_NAMES};
use crate::ppo::train::{parse_metrics_csv, METRICS_HEADER};
use crate::ppo::Policy;
use crate::seeding::{stream_rng, Stream};
use crate::world::{generate_scene, parse_scene, render_scene, Point, Pose, Task};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "navacl", version, about = "Automatic curriculum learning for 2D goal navigation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a scene and write it as a scene file.
    GenScene {
        #[arg(long)]
        seed: u64,
        /// Take generation parameters from this experiment config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Side length in meters (overrides the config).
        #[arg(long)]
        extent: Option<f64>,
        /// Clutter density in [0, 0.3] (overrides the config).
        #[arg(long)]
        clutter: Option<f64>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Print the eight task features of a start/goal pair.
    Features {
        #[arg(long)]
        scene: PathBuf,
        /// `x0,y0,heading0,xg,yg` in meters and radians.
        #[arg(long)]
        task: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train one configuration; resumes from an existing state file.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        mode: Option<String>,
        /// Override the environment step budget.
        #[arg(long)]
        timesteps: Option<u64>,
    },
    /// Evaluate a policy checkpoint on the test scenes.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = 10)]
        tasks_per_scene: usize,
        /// Report destination; defaults to eval_report.csv next to the policy.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump first-trial trajectories as CSV files into this directory.
        #[arg(long)]
        trajectories: Option<PathBuf>,
    },
    /// Train every mode for every seed and compare validation curves.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "uniform,goid,adaptive")]
        modes: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        timesteps: Option<u64>,
    },
    /// Render metrics.csv columns as SVG line charts.
    Plot {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',')]
        columns: Vec<String>,
    },
}

/// Parses `x0,y0,heading0,xg,yg`.
pub fn parse_task_spec(s: &str) -> Result<Task> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 5 {
        return Err(Error::Config(format!("task `{s}` must have 5 comma-separated numbers")));
    }
    let mut v = [0.0; 5];
    for (out, p) in v.iter_mut().zip(&parts) {
        *out = p
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::Config(format!("`{p}` is not a finite number")))?;
    }
    Ok(Task {
        start: Pose::new(v[0], v[1], v[2]),
        goal: Point::new(v[3], v[4]),
    })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    let cfg = match path {
        Some(p) => ExperimentConfig::parse(&read(p)?)?,
        None => ExperimentConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Failure category, mapped to the process exit code.
enum Failure {
    Config(Error),
    Runtime(Error),
}

fn config<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Config)
}

fn runtime<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|e| match e {
        Error::Config(_) => Failure::Config(e),
        e => Failure::Runtime(e),
    })
}

fn parse_modes(names: &[String]) -> Result<Vec<CurriculumMode>> {
    names.iter().map(|m| m.parse()).collect()
}

fn print_row(prefix: &str, r: &crate::ppo::train::MetricsRow) {
    let val = r.val_success.map(|v| format!(" val_success {v:.3}")).unwrap_or_default();
    eprintln!(
        "{prefix}epoch {:>3} steps {:>7} success {:.3} reward {:>7.3} geo {:.2} fallback {:.2}{val}",
        r.epoch, r.timesteps, r.success_rate, r.mean_reward, r.mean_geodesic, r.fallback_rate
    );
}

fn execute(cmd: Command) -> std::result::Result<(), Failure> {
    match cmd {
        Command::GenScene {
            seed,
            config: cfg,
            extent,
            clutter,
            out,
        } => {
            let mut gen = config(load_config(cfg.as_deref()))?.generation;
            gen.scene_extent = extent.unwrap_or(gen.scene_extent);
            gen.clutter_density = clutter.unwrap_or(gen.clutter_density);
            config(gen.validate())?;
            let scene = runtime(generate_scene(seed, &gen))?;
            runtime(write_atomic(&out, render_scene(&scene).as_bytes()))?;
            println!(
                "{}: {}x{} cells, {} free",
                out.display(),
                scene.width_cells(),
                scene.height_cells(),
                scene.free_cell_count()
            );
        }
        Command::Features { scene, task, config: cfg } => {
            let cfg = config(load_config(cfg.as_deref()))?;
            let task = config(parse_task_spec(&task))?;
            let scene = config(read(&scene).and_then(|t| parse_scene(&t)))?;
            let f = runtime(compute_features(&scene, &task, &cfg.train.constraints))?;
            for (name, v) in FEATURE_NAMES.iter().zip(f.to_array()) {
                println!("{name} {v}");
            }
        }
        Command::Train {
            config: cfg,
            output_dir,
            seed,
            mode,
            timesteps,
        } => {
            let mut cfg = config(load_config(cfg.as_deref()))?;
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(m) = mode {
                cfg.train.curriculum.mode = config(m.parse())?;
            }
            if let Some(t) = timesteps {
                cfg.train.total_timesteps = t;
            }
            config(cfg.validate())?;
            let outcome = runtime(run_training(&cfg, &mut |r| print_row("", r)))?;
            let v = &outcome.final_validation.aggregate;
            println!(
                "final validation success {:.3} ± {:.3}, spl {:.3}; outputs in {}",
                v.success_mean,
                v.success_std,
                v.spl_mean,
                cfg.output_dir.display()
            );
        }
        Command::Eval {
            config: cfg,
            policy,
            tasks_per_scene,
            out,
            trajectories,
        } => {
            let cfg = config(load_config(cfg.as_deref()))?;
            if tasks_per_scene == 0 {
                return Err(Failure::Config(Error::Config("tasks_per_scene must be positive".into())));
            }
            let report = runtime(run_evaluation(&cfg, &policy, tasks_per_scene))?;
            let out = out.unwrap_or_else(|| policy.with_file_name("eval_report.csv"));
            runtime(write_atomic(&out, report.to_csv().as_bytes()))?;
            print!("{}", report.to_table());
            if let Some(dir) = trajectories {
                let agent = runtime(TensorArchive::load(&policy).and_then(|a| Policy::from_archive(&a)))?;
                let scenes = runtime(generate_scenes(&cfg.test_scene_seeds, &cfg.generation))?;
                let tasks = runtime(evaluation_tasks(&cfg, &scenes, tasks_per_scene))?;
                for (k, st) in tasks.iter().enumerate() {
                    let mut rng = stream_rng(cfg.seed, Stream::Evaluation, 0, k as u64);
                    let r = runtime(run_episode(
                        &agent,
                        &scenes[st.scene],
                        &st.task,
                        &cfg.train.reward,
                        &cfg.train.constraints,
                        &mut rng,
                    ))?;
                    let path = dir.join(format!("scene{}_task{k:03}.csv", st.scene));
                    runtime(write_atomic(&path, trajectory_csv(&r).as_bytes()))?;
                }
            }
        }
        Command::Ablate {
            config: cfg,
            modes,
            seeds,
            output_dir,
            timesteps,
        } => {
            let mut cfg = config(load_config(cfg.as_deref()))?;
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            if let Some(t) = timesteps {
                cfg.train.total_timesteps = t;
            }
            config(cfg.validate())?;
            let modes = config(parse_modes(&modes))?;
            let report = runtime(ablate(&cfg, &modes, &seeds, &mut |m, s, r| {
                print_row(&format!("[{} seed {s}] ", m.name()), r)
            }))?;
            print!("{}", report.final_csv());
        }
        Command::Plot { metrics, out, columns } => {
            let rows = config(read(&metrics).and_then(|t| parse_metrics_csv(&t)))?;
            let columns: Vec<String> = if columns.is_empty() {
                PLOTTED_COLUMNS.iter().map(|s| s.to_string()).collect()
            } else {
                columns
            };
            for col in &columns {
                if !METRICS_HEADER[3..].contains(&col.as_str()) || col == "update_ok" {
                    return Err(Failure::Config(Error::Config(format!("unknown metrics column `{col}`"))));
                }
                let points: Vec<(f64, f64)> = rows
                    .iter()
                    .filter_map(|r| metric_column(r, col).map(|v| (r.timesteps as f64, v)))
                    .collect();
                let svg = line_chart(col, "environment steps", col, &[Series::new(col.clone(), points)]);
                let path = out.join(format!("{col}.svg"));
                runtime(write_atomic(&path, svg.as_bytes()))?;
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code: 0 on success, 1 for configuration or usage errors, 2 for failures
/// during execution.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
