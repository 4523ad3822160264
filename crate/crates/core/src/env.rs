//! Episode dynamics: motion primitives, collision termination, egocentric
//! observations and the shaped reward
//! `r = 1_succ + δ·(−1_coll + 1_expl) + 0.01·d`.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::world::{sample::valid_task_distance, Point, Pose, Scene, Task, TaskConstraints};

pub const FORWARD_STEP: f64 = 0.2;
pub const TURN_ANGLE: f64 = PI / 6.0;
/// Side length of the egocentric windows in cells.
pub const WINDOW: usize = 15;
pub const OBS_DIM: usize = 2 * WINDOW * WINDOW + 1 + 2 + 1 + 3;
/// Goal range is fed to networks in units of this many meters.
pub const RANGE_SCALE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Forward,
    TurnLeft,
    TurnRight,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Forward, Action::TurnLeft, Action::TurnRight];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Forward => "forward",
            Action::TurnLeft => "left",
            Action::TurnRight => "right",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardConfig {
    pub delta: f64,
    pub exploration_radius: f64,
    pub success_radius: f64,
    pub max_steps: usize,
    pub agent_radius: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            delta: 0.5,
            exploration_radius: 0.5,
            success_radius: 0.3,
            max_steps: 150,
            agent_radius: crate::world::DEFAULT_AGENT_RADIUS,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta {} not in (0, 1)", self.delta)));
        }
        if !(self.exploration_radius > 0.0 && self.success_radius > 0.0 && self.agent_radius >= 0.0) {
            return Err(Error::Config("radii must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Motion {
    pub pose: Pose,
    pub collided: bool,
    pub distance: f64,
    pub reached_goal: bool,
}

/// Applies one motion primitive. Turns always succeed. A forward move sweeps
/// the agent disc in substeps of half a cell; on the first blocked substep
/// the agent stops at the previous free one and `collided` is set.
pub fn step(scene: &Scene, pose: Pose, action: Action, agent_radius: f64) -> Motion {
    sweep(scene, pose, action, agent_radius, None)
}

fn sweep(scene: &Scene, pose: Pose, action: Action, agent_radius: f64, goal: Option<(Point, f64)>) -> Motion {
    let turned = |delta: f64| Motion {
        pose: Pose::new(pose.x, pose.y, pose.heading + delta),
        collided: false,
        distance: 0.0,
        reached_goal: false,
    };
    match action {
        Action::TurnLeft => return turned(TURN_ANGLE),
        Action::TurnRight => return turned(-TURN_ANGLE),
        Action::Forward => {}
    }
    let substep = scene.cell_size() / 2.0;
    let n = (FORWARD_STEP / substep).ceil() as usize;
    let (sin, cos) = pose.heading.sin_cos();
    let mut last = 0.0;
    for k in 1..=n {
        let d = (k as f64 * substep).min(FORWARD_STEP);
        let p = Point::new(pose.x + d * cos, pose.y + d * sin);
        if !scene.is_traversable(p, agent_radius) {
            return Motion {
                pose: Pose::new(pose.x + last * cos, pose.y + last * sin, pose.heading),
                collided: true,
                distance: last,
                reached_goal: false,
            };
        }
        last = d;
        if let Some((g, radius)) = goal {
            if p.distance(g) <= radius {
                return Motion {
                    pose: Pose::new(p.x, p.y, pose.heading),
                    collided: false,
                    distance: d,
                    reached_goal: true,
                };
            }
        }
    }
    Motion {
        pose: Pose::new(pose.x + last * cos, pose.y + last * sin, pose.heading),
        collided: false,
        distance: last,
        reached_goal: false,
    }
}

/// True iff `pos` is farther than `radius` from every buffered position.
///
/// The buffer holds the episode start plus every position that earned the
/// bonus; `pos` is recorded only when it is novel. Recording every pose would
/// keep the previous step (at most 0.2 m away) in the buffer and the bonus
/// could never fire.
pub fn exploration_check(buffer: &mut Vec<Point>, pos: Point, radius: f64) -> bool {
    let novel = buffer.iter().all(|b| b.distance(pos) > radius);
    if novel {
        buffer.push(pos);
    }
    novel
}

pub fn compute_reward(reached_goal: bool, collided: bool, explored: bool, distance: f64, delta: f64) -> f64 {
    let ind = |b: bool| if b { 1.0 } else { 0.0 };
    ind(reached_goal) + delta * (-ind(collided) + ind(explored)) + 0.01 * distance
}

/// Cells visited during an episode.
#[derive(Debug, Clone)]
pub struct VisitMap {
    width: usize,
    visited: Vec<bool>,
}

impl VisitMap {
    pub fn new(scene: &Scene) -> Self {
        Self {
            width: scene.width_cells(),
            visited: vec![false; scene.width_cells() * scene.height_cells()],
        }
    }

    pub fn mark(&mut self, scene: &Scene, p: Point) {
        if let Some((i, j)) = scene.cell_of(p) {
            self.visited[j * self.width + i] = true;
        }
    }

    fn get(&self, i: i64, j: i64) -> bool {
        let h = self.visited.len() / self.width;
        i >= 0 && j >= 0 && (i as usize) < self.width && (j as usize) < h && self.visited[j as usize * self.width + i as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Egocentric occupancy, row `a` = cells ahead, column `b` = cells to the left.
    pub local_occupancy: Vec<f64>,
    pub goal_visible: bool,
    /// `(sin, cos)` of the goal bearing relative to the heading.
    pub goal_bearing: (f64, f64),
    pub goal_range: f64,
    pub visitation: Vec<f64>,
    pub last_action: Option<Action>,
}

impl Observation {
    /// Flat network input of length [`OBS_DIM`].
    pub fn encode_into(&self, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.local_occupancy);
        out.extend_from_slice(&self.visitation);
        out.push(if self.goal_visible { 1.0 } else { 0.0 });
        out.push(self.goal_bearing.0);
        out.push(self.goal_bearing.1);
        out.push(self.goal_range / RANGE_SCALE);
        for a in Action::ALL {
            out.push(if self.last_action == Some(a) { 1.0 } else { 0.0 });
        }
    }

    pub fn encode(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(OBS_DIM);
        self.encode_into(&mut v);
        v
    }
}

/// Grid ray cast: true iff no obstacle cell lies on the segment.
pub fn line_of_sight(scene: &Scene, a: Point, b: Point) -> bool {
    let len = a.distance(b);
    let step = scene.cell_size() / 4.0;
    let n = (len / step).ceil().max(1.0) as usize;
    (0..=n).all(|k| {
        let t = k as f64 / n as f64;
        let p = Point::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t);
        scene.cell_of(p).is_some_and(|c| !scene.occupied(c))
    })
}

pub fn observe(scene: &Scene, pose: Pose, goal: Point, visited: &VisitMap, last_action: Option<Action>) -> Observation {
    let half = (WINDOW / 2) as i64;
    let s = scene.cell_size();
    let (sin, cos) = pose.heading.sin_cos();
    let mut local_occupancy = Vec::with_capacity(WINDOW * WINDOW);
    let mut visitation = Vec::with_capacity(WINDOW * WINDOW);
    for a in (-half..=half).rev() {
        for b in (-half..=half).rev() {
            let (fx, ly) = (a as f64 * s, b as f64 * s);
            let x = pose.x + fx * cos - ly * sin;
            let y = pose.y + fx * sin + ly * cos;
            let (i, j) = ((x / s).floor() as i64, (y / s).floor() as i64);
            local_occupancy.push(if scene.occupied_signed(i, j) { 1.0 } else { 0.0 });
            visitation.push(if visited.get(i, j) { 1.0 } else { 0.0 });
        }
    }
    let pos = pose.position();
    let goal_visible = line_of_sight(scene, pos, goal);
    let (goal_bearing, goal_range) = if goal_visible {
        let bearing = (goal.y - pos.y).atan2(goal.x - pos.x) - pose.heading;
        (bearing.sin_cos(), pos.distance(goal))
    } else {
        ((0.0, 0.0), 0.0)
    };
    Observation {
        local_occupancy,
        goal_visible,
        goal_bearing,
        goal_range,
        visitation,
        last_action,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalCause {
    Goal,
    Collision,
    Timeout,
}

impl TerminalCause {
    pub fn name(self) -> &'static str {
        match self {
            TerminalCause::Goal => "goal",
            TerminalCause::Collision => "collision",
            TerminalCause::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryStep {
    /// Pose before the action.
    pub pose: Pose,
    pub action: Action,
    pub reward: f64,
    pub collided: bool,
    pub explored: bool,
    pub reached_goal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub task: Task,
    pub success: bool,
    pub steps: usize,
    pub path_length: f64,
    pub shortest_path: f64,
    pub trajectory: Vec<TrajectoryStep>,
    pub final_pose: Pose,
    pub terminal_cause: TerminalCause,
}

impl EpisodeResult {
    pub fn total_reward(&self) -> f64 {
        self.trajectory.iter().map(|s| s.reward).sum()
    }
}

/// An action choice with the quantities PPO needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub action: Action,
    pub log_prob: f64,
    pub value: f64,
}

/// Anything that can drive an episode.
pub trait Agent {
    fn decide<R: Rng + ?Sized>(&self, observation: &[f64], rng: &mut R) -> Decision;
    fn value(&self, observation: &[f64]) -> f64;
}

/// Per-step data recorded for learning.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub observation: Vec<f64>,
    pub decision: Decision,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordedEpisode {
    pub result: EpisodeResult,
    pub steps: Vec<StepRecord>,
    /// Value of the state after the last step when the episode timed out.
    pub bootstrap_value: Option<f64>,
}

pub fn run_episode<A: Agent, R: Rng + ?Sized>(
    agent: &A,
    scene: &Scene,
    task: &Task,
    config: &RewardConfig,
    constraints: &TaskConstraints,
    rng: &mut R,
) -> Result<EpisodeResult> {
    run(agent, scene, task, config, constraints, rng, false).map(|r| r.result)
}

pub fn run_episode_recorded<A: Agent, R: Rng + ?Sized>(
    agent: &A,
    scene: &Scene,
    task: &Task,
    config: &RewardConfig,
    constraints: &TaskConstraints,
    rng: &mut R,
) -> Result<RecordedEpisode> {
    run(agent, scene, task, config, constraints, rng, true)
}

fn run<A: Agent, R: Rng + ?Sized>(
    agent: &A,
    scene: &Scene,
    task: &Task,
    config: &RewardConfig,
    constraints: &TaskConstraints,
    rng: &mut R,
    record: bool,
) -> Result<RecordedEpisode> {
    let shortest_path = valid_task_distance(scene, task, constraints)
        .ok_or_else(|| Error::InvalidTask("episode task failed validation".into()))?;
    let mut pose = task.start;
    let mut visited = VisitMap::new(scene);
    visited.mark(scene, pose.position());
    let mut buffer = vec![pose.position()];
    let mut last_action = None;
    let mut trajectory = Vec::new();
    let mut steps = Vec::new();
    let mut path_length = 0.0;
    let mut obs = Vec::with_capacity(OBS_DIM);
    let mut cause = TerminalCause::Timeout;

    for _ in 0..config.max_steps {
        observe(scene, pose, task.goal, &visited, last_action).encode_into(&mut obs);
        let decision = agent.decide(&obs, rng);
        let motion = sweep(
            scene,
            pose,
            decision.action,
            config.agent_radius,
            Some((task.goal, config.success_radius)),
        );
        let explored = exploration_check(&mut buffer, motion.pose.position(), config.exploration_radius);
        let reward = compute_reward(motion.reached_goal, motion.collided, explored, motion.distance, config.delta);
        trajectory.push(TrajectoryStep {
            pose,
            action: decision.action,
            reward,
            collided: motion.collided,
            explored,
            reached_goal: motion.reached_goal,
        });
        if record {
            steps.push(StepRecord {
                observation: obs.clone(),
                decision,
                reward,
            });
        }
        path_length += motion.distance;
        pose = motion.pose;
        visited.mark(scene, pose.position());
        last_action = Some(decision.action);
        if motion.reached_goal {
            cause = TerminalCause::Goal;
            break;
        }
        if motion.collided {
            cause = TerminalCause::Collision;
            break;
        }
    }

    let bootstrap_value = (record && cause == TerminalCause::Timeout).then(|| {
        observe(scene, pose, task.goal, &visited, last_action).encode_into(&mut obs);
        agent.value(&obs)
    });
    Ok(RecordedEpisode {
        result: EpisodeResult {
            task: *task,
            success: cause == TerminalCause::Goal,
            steps: trajectory.len(),
            path_length,
            shortest_path,
            trajectory,
            final_pose: pose,
            terminal_cause: cause,
        },
        steps,
        bootstrap_value,
    })
}

/// CSV rows `(step, x, y, heading, action, reward, collided, explored, reached)`.
pub fn trajectory_csv(result: &EpisodeResult) -> String {
    let mut out = String::from("step,x,y,heading,action,reward,collided,explored,reached\n");
    for (k, s) in result.trajectory.iter().enumerate() {
        out.push_str(&format!(
            "{k},{},{},{},{},{},{},{},{}\n",
            s.pose.x,
            s.pose.y,
            s.pose.heading,
            s.action.name(),
            s.reward,
            u8::from(s.collided),
            u8::from(s.explored),
            u8::from(s.reached_goal)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Scripted(Vec<Action>, std::cell::Cell<usize>);

    impl Agent for Scripted {
        fn decide<R: Rng + ?Sized>(&self, _: &[f64], _: &mut R) -> Decision {
            let k = self.1.get();
            self.1.set(k + 1);
            Decision {
                action: self.0[k % self.0.len()],
                log_prob: 0.0,
                value: 0.0,
            }
        }
        fn value(&self, _: &[f64]) -> f64 {
            0.0
        }
    }

    fn scripted(a: &[Action]) -> Scripted {
        Scripted(a.to_vec(), std::cell::Cell::new(0))
    }

    #[test]
    fn turns_rotate_in_place() {
        let scene = Scene::empty_room(30, 30, 0.1);
        let p = Pose::new(1.5, 1.5, 0.0);
        let m = step(&scene, p, Action::TurnLeft, 0.15);
        assert_eq!((m.pose.x, m.pose.y), (1.5, 1.5));
        assert!((m.pose.heading - PI / 6.0).abs() < 1e-15);
        assert!(!m.collided && m.distance == 0.0);
        let m = step(&scene, p, Action::TurnRight, 0.15);
        assert!((m.pose.heading + PI / 6.0).abs() < 1e-15);
    }

    #[test]
    fn forward_in_open_space() {
        let scene = Scene::empty_room(30, 30, 0.1);
        let m = step(&scene, Pose::new(1.5, 1.5, PI / 3.0), Action::Forward, 0.15);
        let moved = m.pose.position().distance(Point::new(1.5, 1.5));
        assert!((moved - 0.2).abs() < 1e-12);
        assert!((m.distance - 0.2).abs() < 1e-15);
        assert!(!m.collided);
    }

    #[test]
    fn forward_into_wall_stops_on_free_pose() {
        let scene = Scene::empty_room(30, 30, 0.1);
        // Wall face at x = 2.9; disc edge 0.09 m away.
        let start = Pose::new(2.66, 1.5, 0.0);
        let m = step(&scene, start, Action::Forward, 0.15);
        assert!(m.collided);
        assert!(m.distance < 0.1);
        assert!(scene.is_traversable(m.pose.position(), 0.15));
    }

    #[test]
    fn reward_formula() {
        assert!((compute_reward(true, false, false, 0.2, 0.5) - 1.002).abs() < 1e-15);
        assert!((compute_reward(false, true, false, 0.1, 0.5) - (-0.5 + 0.001)).abs() < 1e-15);
        assert_eq!(compute_reward(false, false, false, 0.0, 0.5), 0.0);
        assert!((compute_reward(false, false, true, 0.2, 0.3) - 0.302).abs() < 1e-15);
    }

    #[test]
    fn exploration_buffer() {
        let mut buf = vec![Point::new(0.0, 0.0)];
        assert!(!exploration_check(&mut buf, Point::new(0.2, 0.0), 0.5));
        assert!(!exploration_check(&mut buf, Point::new(0.4, 0.0), 0.5));
        assert!(exploration_check(&mut buf, Point::new(0.6, 0.0), 0.5));
        assert_eq!(buf.len(), 2);
        assert!(!exploration_check(&mut buf, Point::new(0.8, 0.0), 0.5));
        assert!(exploration_check(&mut buf, Point::new(1.2, 0.0), 0.5));
        let mut buf = vec![Point::new(1.0, 1.0)];
        for _ in 0..100 {
            assert!(!exploration_check(&mut buf, Point::new(1.0, 1.0), 0.5));
        }
    }

    #[test]
    fn observation_goal_fields_zero_when_hidden() {
        let mut occ = Scene::empty_room(40, 20, 0.1).occupancy().to_vec();
        for j in 0..20 {
            occ[j * 40 + 20] = true;
        }
        let scene = Scene::from_occupancy(40, 20, 0.1, occ, 0).unwrap();
        let visited = VisitMap::new(&scene);
        let o = observe(&scene, Pose::new(1.0, 1.0, 0.0), Point::new(3.0, 1.0), &visited, None);
        assert!(!o.goal_visible);
        assert_eq!((o.goal_bearing, o.goal_range), ((0.0, 0.0), 0.0));
        let o = observe(&scene, Pose::new(1.0, 1.0, 0.0), Point::new(1.0, 1.5), &visited, Some(Action::Forward));
        assert!(o.goal_visible);
        assert!((o.goal_bearing.0 - 1.0).abs() < 1e-12);
        assert!((o.goal_range - 0.5).abs() < 1e-12);
        let v = o.encode();
        assert_eq!(v.len(), OBS_DIM);
        assert!(v.iter().all(|x| x.is_finite()));
        assert_eq!(&v[OBS_DIM - 3..], &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn egocentric_window_rotates_with_heading() {
        let scene = Scene::empty_room(40, 40, 0.1);
        let visited = VisitMap::new(&scene);
        // Wall directly ahead when facing +x near the east wall.
        let east = observe(&scene, Pose::new(3.55, 2.05, 0.0), Point::new(2.0, 2.0), &visited, None);
        let north = observe(&scene, Pose::new(2.05, 3.55, PI / 2.0), Point::new(2.0, 2.0), &visited, None);
        assert_eq!(east.local_occupancy, north.local_occupancy);
        // First row (farthest ahead) is fully blocked.
        assert!(east.local_occupancy[..WINDOW].iter().all(|&c| c == 1.0));
    }

    #[test]
    fn episode_reaches_goal_straight_ahead() {
        let scene = Scene::empty_room(60, 20, 0.1);
        let task = Task {
            start: Pose::new(1.05, 1.05, 0.0),
            goal: Point::new(3.02, 1.05),
        };
        let agent = scripted(&[Action::Forward]);
        let mut rng = rand::rng();
        let r = run_episode(&agent, &scene, &task, &RewardConfig::default(), &TaskConstraints::default(), &mut rng).unwrap();
        assert!(r.success);
        assert_eq!(r.terminal_cause, TerminalCause::Goal);
        // The 0.3 m goal disc is entered mid-way through the 9th forward move.
        assert_eq!(r.steps, 9);
        assert!((r.path_length - 1.7).abs() < 1e-9);
        assert!((r.shortest_path - 2.0).abs() < 1e-9);
    }

    #[test]
    fn spinning_times_out() {
        let scene = Scene::empty_room(60, 20, 0.1);
        let task = Task {
            start: Pose::new(1.05, 1.05, 0.0),
            goal: Point::new(3.05, 1.05),
        };
        let agent = scripted(&[Action::TurnLeft]);
        let mut rng = rand::rng();
        let r = run_episode_recorded(&agent, &scene, &task, &RewardConfig::default(), &TaskConstraints::default(), &mut rng).unwrap();
        assert_eq!(r.result.terminal_cause, TerminalCause::Timeout);
        assert_eq!(r.result.steps, 150);
        assert_eq!(r.result.total_reward(), 0.0);
        assert_eq!(r.bootstrap_value, Some(0.0));
        assert_eq!(r.steps.len(), 150);
    }
}
