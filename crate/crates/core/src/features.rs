//! Geometric task features fed to the success predictor.

use crate::error::{Error, Result};
use crate::world::{self, Scene, Task, TaskConstraints};

pub const FEATURE_COUNT: usize = 8;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "geodesic",
    "path_complexity",
    "sin_turn",
    "cos_turn",
    "agent_clearance",
    "goal_clearance",
    "agent_island",
    "goal_island",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskFeatures {
    pub geodesic_distance: f64,
    /// Euclidean over geodesic distance.
    pub path_complexity: f64,
    pub sin_turn: f64,
    pub cos_turn: f64,
    pub agent_clearance: f64,
    pub goal_clearance: f64,
    pub agent_island: f64,
    pub goal_island: f64,
}

impl TaskFeatures {
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.geodesic_distance,
            self.path_complexity,
            self.sin_turn,
            self.cos_turn,
            self.agent_clearance,
            self.goal_clearance,
            self.agent_island,
            self.goal_island,
        ]
    }

    pub fn from_array(a: [f64; FEATURE_COUNT]) -> Self {
        Self {
            geodesic_distance: a[0],
            path_complexity: a[1],
            sin_turn: a[2],
            cos_turn: a[3],
            agent_clearance: a[4],
            goal_clearance: a[5],
            agent_island: a[6],
            goal_island: a[7],
        }
    }
}

/// Computes the 8 features of a valid task.
pub fn compute_features(scene: &Scene, task: &Task, constraints: &TaskConstraints) -> Result<TaskFeatures> {
    let geodesic = world::sample::valid_task_distance(scene, task, constraints).ok_or_else(|| {
        Error::InvalidTask(format!(
            "start ({:.3}, {:.3}) goal ({:.3}, {:.3})",
            task.start.x, task.start.y, task.goal.x, task.goal.y
        ))
    })?;
    features_with_geodesic(scene, task, geodesic)
}

/// Feature computation when the geodesic distance is already known.
pub(crate) fn features_with_geodesic(scene: &Scene, task: &Task, geodesic: f64) -> Result<TaskFeatures> {
    let start = task.start.position();
    let euclid = start.distance(task.goal);
    let path_complexity = if geodesic > 0.0 { euclid / geodesic } else { 1.0 };
    let (sin_turn, cos_turn) = if euclid > 0.0 {
        let bearing = (task.goal.y - start.y).atan2(task.goal.x - start.x);
        (bearing - task.start.heading).sin_cos()
    } else {
        (0.0, 1.0)
    };
    let agent_clearance = scene.clearance(start)?;
    let goal_clearance = scene.clearance(task.goal)?;
    Ok(TaskFeatures {
        geodesic_distance: geodesic,
        path_complexity,
        sin_turn,
        cos_turn,
        agent_clearance,
        goal_clearance,
        agent_island: scene.island_radius(start)?,
        goal_island: scene.island_radius(task.goal)?,
    })
}

/// Per-feature mean and standard deviation used to standardize inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub mean: [f64; FEATURE_COUNT],
    pub std: [f64; FEATURE_COUNT],
}

pub const STD_FLOOR: f64 = 1e-6;

impl Default for FeatureStats {
    fn default() -> Self {
        Self {
            mean: [0.0; FEATURE_COUNT],
            std: [1.0; FEATURE_COUNT],
        }
    }
}

impl FeatureStats {
    /// Population mean/std over a sample of feature vectors.
    pub fn fit(samples: &[TaskFeatures]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let n = samples.len() as f64;
        let mut mean = [0.0; FEATURE_COUNT];
        for s in samples {
            for (m, v) in mean.iter_mut().zip(s.to_array()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = [0.0; FEATURE_COUNT];
        for s in samples {
            for ((sd, v), m) in std.iter_mut().zip(s.to_array()).zip(mean) {
                *sd += (v - m) * (v - m);
            }
        }
        std.iter_mut().for_each(|sd| *sd = (*sd / n).sqrt());
        Self { mean, std }
    }
}

/// `(x - mean) / max(std, 1e-6)` per dimension.
pub fn normalize_features(features: &TaskFeatures, stats: &FeatureStats) -> [f64; FEATURE_COUNT] {
    let mut out = features.to_array();
    for ((x, m), s) in out.iter_mut().zip(stats.mean).zip(stats.std) {
        *x = (*x - m) / s.max(STD_FLOOR);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Point, Pose};
    use std::f64::consts::PI;

    fn room() -> Scene {
        Scene::empty_room(60, 20, 0.1)
    }

    #[test]
    fn goal_ahead_and_behind() {
        let scene = room();
        let c = TaskConstraints::default();
        let ahead = Task {
            start: Pose::new(1.05, 1.05, 0.0),
            goal: Point::new(4.05, 1.05),
        };
        let f = compute_features(&scene, &ahead, &c).unwrap();
        assert_eq!(f.sin_turn, 0.0);
        assert_eq!(f.cos_turn, 1.0);
        assert!((f.path_complexity - 1.0).abs() < 1e-9);
        assert!((f.geodesic_distance - 3.0).abs() < 1e-9);

        let behind = Task {
            start: Pose::new(4.05, 1.05, 0.0),
            goal: Point::new(1.05, 1.05),
        };
        let f = compute_features(&scene, &behind, &c).unwrap();
        assert!(f.sin_turn.abs() < 1e-12);
        assert!((f.cos_turn + 1.0).abs() < 1e-12);
        let left = Task {
            start: Pose::new(1.05, 0.55, 0.0),
            goal: Point::new(1.05, 1.55),
        };
        let f = compute_features(&scene, &left, &c).unwrap();
        assert!((f.sin_turn - (PI / 2.0).sin()).abs() < 1e-12);
    }

    #[test]
    fn invalid_task_is_an_error() {
        let scene = room();
        let t = Task {
            start: Pose::new(0.05, 0.05, 0.0),
            goal: Point::new(1.0, 1.0),
        };
        assert!(compute_features(&scene, &t, &TaskConstraints::default()).is_err());
    }

    #[test]
    fn normalization_floors_std() {
        let f = TaskFeatures::from_array([1.0; FEATURE_COUNT]);
        let stats = FeatureStats::fit(&[f, f]);
        assert_eq!(stats.std, [0.0; FEATURE_COUNT]);
        assert_eq!(normalize_features(&f, &stats), [0.0; FEATURE_COUNT]);
        let g = TaskFeatures::from_array([3.0; FEATURE_COUNT]);
        let stats = FeatureStats::fit(&[f, g]);
        assert_eq!(normalize_features(&g, &stats), [1.0; FEATURE_COUNT]);
    }
}
