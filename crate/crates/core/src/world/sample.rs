use std::f64::consts::{PI, SQRT_2};

use rand::Rng;

use super::{Point, Pose, Scene, Task, DEFAULT_AGENT_RADIUS};
use crate::error::{Error, Result};

/// Constraints applied by [`sample_random_task`] and [`task_valid`].
#[derive(Debug, Clone, PartialEq)]
pub struct TaskConstraints {
    pub max_task_distance: f64,
    /// Tasks whose geodesic distance is below this are rejected; an episode
    /// starting inside the success radius would be solved before moving.
    pub min_task_distance: f64,
    pub agent_radius: f64,
    pub max_attempts: u32,
}

impl Default for TaskConstraints {
    fn default() -> Self {
        Self {
            max_task_distance: 10.0,
            min_task_distance: 0.5,
            agent_radius: DEFAULT_AGENT_RADIUS,
            max_attempts: 1000,
        }
    }
}

/// Geodesic distance of a valid task, or `None` if the task is invalid.
pub(crate) fn valid_task_distance(scene: &Scene, task: &Task, c: &TaskConstraints) -> Option<f64> {
    let (a, b) = (task.start.position(), task.goal);
    if !scene.is_traversable(a, c.agent_radius) || !scene.is_traversable(b, c.agent_radius) {
        return None;
    }
    // Endpoints snap to cell centers, so the graph distance can undercut the
    // straight line by at most one cell diagonal.
    if a.distance(b) > c.max_task_distance + scene.cell_size() * SQRT_2 {
        return None;
    }
    let d = scene.geodesic_within(a, b, c.agent_radius, c.max_task_distance)?;
    (d <= c.max_task_distance && d >= c.min_task_distance).then_some(d)
}

/// True iff both endpoints are traversable and connected by a path whose
/// geodesic length lies within `[min_task_distance, max_task_distance]`.
pub fn task_valid(scene: &Scene, task: &Task, constraints: &TaskConstraints) -> bool {
    valid_task_distance(scene, task, constraints).is_some()
}

/// Uniform point over the traversable region (rejection within free cells).
pub(crate) fn sample_traversable_point<R: Rng + ?Sized>(
    scene: &Scene,
    agent_radius: f64,
    rng: &mut R,
) -> Option<Point> {
    let nav = scene.nav(agent_radius);
    let open = nav.open_cells();
    if open.is_empty() {
        return None;
    }
    let s = scene.cell_size();
    let w = scene.width_cells();
    for _ in 0..256 {
        let k = open[rng.random_range(0..open.len())] as usize;
        let p = Point::new(
            ((k % w) as f64 + rng.random::<f64>()) * s,
            ((k / w) as f64 + rng.random::<f64>()) * s,
        );
        if scene.is_traversable(p, agent_radius) {
            return Some(p);
        }
    }
    None
}

/// Draws `(start pose, goal)` uniformly over traversable points and
/// resamples until [`task_valid`] holds, up to `max_attempts`.
pub fn sample_random_task<R: Rng + ?Sized>(
    scene: &Scene,
    rng: &mut R,
    constraints: &TaskConstraints,
) -> Result<Task> {
    sample_random_task_with_distance(scene, rng, constraints).map(|(t, _)| t)
}

pub(crate) fn sample_random_task_with_distance<R: Rng + ?Sized>(
    scene: &Scene,
    rng: &mut R,
    constraints: &TaskConstraints,
) -> Result<(Task, f64)> {
    for _ in 0..constraints.max_attempts {
        let Some(start) = sample_traversable_point(scene, constraints.agent_radius, rng) else {
            continue;
        };
        let heading = rng.random_range(-PI..PI);
        let Some(goal) = sample_traversable_point(scene, constraints.agent_radius, rng) else {
            continue;
        };
        let task = Task {
            start: Pose::new(start.x, start.y, heading),
            goal,
        };
        if let Some(d) = valid_task_distance(scene, &task, constraints) {
            return Ok((task, d));
        }
    }
    Err(Error::SamplingExhausted(constraints.max_attempts))
}
