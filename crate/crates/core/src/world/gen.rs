use std::collections::VecDeque;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{NavGrid, Scene, DEFAULT_AGENT_RADIUS};
use crate::error::{Error, Result};
use crate::seeding::mix_seed;

/// Procedural scene parameters. Lengths are meters.
#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub scene_extent: f64,
    pub cell_size: f64,
    pub room_count: (u32, u32),
    pub room_size: (f64, f64),
    pub corridor_width: (f64, f64),
    /// Fraction of free cells converted into obstacle blobs.
    pub clutter_density: f64,
    /// Radius of the agent the scene must accommodate.
    pub agent_radius: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            scene_extent: 20.0,
            cell_size: 0.1,
            room_count: (4, 8),
            room_size: (3.0, 7.0),
            corridor_width: (1.0, 1.6),
            clutter_density: 0.05,
            agent_radius: DEFAULT_AGENT_RADIUS,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return bad(format!("cell_size must be positive, got {}", self.cell_size));
        }
        if !(self.scene_extent.is_finite() && self.scene_extent >= 20.0 * self.cell_size) {
            return bad(format!("scene_extent {} too small", self.scene_extent));
        }
        if self.scene_extent / self.cell_size > 4096.0 {
            return bad(format!("scene_extent {} too large", self.scene_extent));
        }
        if self.room_count.0 == 0 || self.room_count.0 > self.room_count.1 {
            return bad(format!("invalid room_count range {:?}", self.room_count));
        }
        let (rmin, rmax) = self.room_size;
        if !(rmin > 0.0 && rmin <= rmax && rmax < self.scene_extent - 2.0 * self.cell_size) {
            return bad(format!("invalid room_size range {:?}", self.room_size));
        }
        let (cmin, cmax) = self.corridor_width;
        if !(self.agent_radius >= 0.0 && self.agent_radius.is_finite()) {
            return bad(format!("invalid agent_radius {}", self.agent_radius));
        }
        if !(cmin >= 2.0 * self.agent_radius && cmin <= cmax && cmax <= rmin) {
            return bad(format!(
                "corridor_width {:?} must be within [agent diameter, min room size]",
                self.corridor_width
            ));
        }
        if !(0.0..=0.3).contains(&self.clutter_density) {
            return bad(format!("clutter_density {} not in [0, 0.3]", self.clutter_density));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Room {
    x0: usize,
    y0: usize,
    x1: usize,
    y1: usize,
}

impl Room {
    fn center(&self) -> (usize, usize) {
        ((self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2)
    }

    fn overlaps(&self, other: &Room, gap: usize) -> bool {
        self.x0 <= other.x1 + gap
            && other.x0 <= self.x1 + gap
            && self.y0 <= other.y1 + gap
            && other.y0 <= self.y1 + gap
    }
}

struct Canvas {
    n: usize,
    occ: Vec<bool>,
}

impl Canvas {
    fn carve_rect(&mut self, x0: i64, y0: i64, x1: i64, y1: i64) {
        let hi = self.n as i64 - 2;
        for j in y0.max(1)..=y1.min(hi) {
            for i in x0.max(1)..=x1.min(hi) {
                self.occ[j as usize * self.n + i as usize] = false;
            }
        }
    }

    /// Axis-aligned L-shaped corridor of `w` cells between two cells.
    fn carve_corridor(&mut self, a: (usize, usize), b: (usize, usize), w: usize, horizontal_first: bool) {
        let lo = (w as i64 - 1) / 2;
        let hi = w as i64 / 2;
        let (ax, ay, bx, by) = (a.0 as i64, a.1 as i64, b.0 as i64, b.1 as i64);
        let corner = if horizontal_first { (bx, ay) } else { (ax, by) };
        for (p, q) in [((ax, ay), corner), (corner, (bx, by))] {
            let (x0, x1) = (p.0.min(q.0), p.0.max(q.0));
            let (y0, y1) = (p.1.min(q.1), p.1.max(q.1));
            self.carve_rect(x0 - lo, y0 - lo, x1 + hi, y1 + hi);
        }
    }
}

const MAX_ATTEMPTS: u32 = 16;

/// Generates a scene: rooms joined by corridors, then clutter blobs, then
/// connectivity repair until every room lies in the largest traversable
/// component. Deterministic in `(seed, config)`.
pub fn generate_scene(seed: u64, config: &GenConfig) -> Result<Scene> {
    config.validate()?;
    let mut last_reason = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        match try_generate(seed, attempt, config) {
            Ok(scene) => return Ok(scene),
            Err(reason) => last_reason = reason,
        }
    }
    Err(Error::Generation {
        attempts: MAX_ATTEMPTS,
        reason: last_reason,
    })
}

fn try_generate(seed: u64, attempt: u32, cfg: &GenConfig) -> Result<Scene, String> {
    let s = cfg.cell_size;
    let n = (cfg.scene_extent / s).round() as usize;
    let to_cells = |m: f64| ((m / s).round() as usize).max(1);
    // Separate streams: the clutter pass never perturbs the room layout.
    let mut layout_rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, attempt as u64, 1]));
    let mut clutter_rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, attempt as u64, 2]));

    let mut canvas = Canvas {
        n,
        occ: vec![true; n * n],
    };

    let target = layout_rng.random_range(cfg.room_count.0..=cfg.room_count.1) as usize;
    let mut rooms: Vec<Room> = Vec::new();
    for _ in 0..target * 50 {
        if rooms.len() == target {
            break;
        }
        let w = to_cells(layout_rng.random_range(cfg.room_size.0..=cfg.room_size.1)).min(n - 4);
        let h = to_cells(layout_rng.random_range(cfg.room_size.0..=cfg.room_size.1)).min(n - 4);
        let x0 = layout_rng.random_range(1..=n - 2 - w);
        let y0 = layout_rng.random_range(1..=n - 2 - h);
        let room = Room {
            x0,
            y0,
            x1: x0 + w - 1,
            y1: y0 + h - 1,
        };
        if rooms.iter().all(|r| !r.overlaps(&room, 3)) {
            rooms.push(room);
        }
    }
    if rooms.is_empty() {
        return Err("no room fits the scene".into());
    }
    for r in &rooms {
        canvas.carve_rect(r.x0 as i64, r.y0 as i64, r.x1 as i64, r.y1 as i64);
    }
    let corridor_cells = |rng: &mut ChaCha8Rng| {
        to_cells(rng.random_range(cfg.corridor_width.0..=cfg.corridor_width.1))
    };
    for k in 1..rooms.len() {
        let c = rooms[k].center();
        let nearest = (0..k)
            .min_by_key(|&m| {
                let o = rooms[m].center();
                c.0.abs_diff(o.0).pow(2) + c.1.abs_diff(o.1).pow(2)
            })
            .expect("k >= 1");
        let w = corridor_cells(&mut layout_rng);
        let horizontal_first = layout_rng.random_bool(0.5);
        canvas.carve_corridor(c, rooms[nearest].center(), w, horizontal_first);
    }

    let layout = canvas.occ.clone();
    let mut layout_nav: Option<Arc<NavGrid>> = None;
    if cfg.clutter_density > 0.0 {
        let free: Vec<usize> = (0..n * n).filter(|&k| !canvas.occ[k]).collect();
        let quota = (cfg.clutter_density * free.len() as f64).round() as usize;
        let mut converted = 0;
        let mut tries = 0;
        while converted < quota && tries < 100 * quota.max(1) {
            tries += 1;
            let centre = free[clutter_rng.random_range(0..free.len())];
            let radius = clutter_rng.random_range(0.15..0.4) / s;
            let (ci, cj) = ((centre % n) as f64, (centre / n) as f64);
            let reach = radius.ceil() as i64;
            for dj in -reach..=reach {
                for di in -reach..=reach {
                    if ((di * di + dj * dj) as f64) > radius * radius {
                        continue;
                    }
                    let (i, j) = (ci as i64 + di, cj as i64 + dj);
                    if i < 1 || j < 1 || i > n as i64 - 2 || j > n as i64 - 2 {
                        continue;
                    }
                    let k = j as usize * n + i as usize;
                    if !canvas.occ[k] && converted < quota {
                        canvas.occ[k] = true;
                        converted += 1;
                    }
                }
            }
        }
    }

    // Connectivity repair.
    let repair_width = to_cells(cfg.corridor_width.1);
    for _ in 0..=rooms.len() + 4 {
        let scene = Scene::from_occupancy(n, n, s, canvas.occ.clone(), seed).map_err(|e| e.to_string())?;
        let nav = scene.nav(cfg.agent_radius);
        let Some((largest, size)) = nav.largest_component() else {
            // Nothing traversable: re-open the first room's center and retry.
            let c = rooms[0].center();
            canvas.carve_corridor(c, c, repair_width, true);
            continue;
        };
        let connected: Vec<bool> = rooms
            .iter()
            .map(|r| nav.component(r.center()) == Some(largest))
            .collect();
        if connected.iter().all(|&c| c) {
            if size < 100 {
                return Err(format!("largest component has only {size} cells"));
            }
            return Ok(scene);
        }
        let anchors: Vec<(usize, usize)> = rooms
            .iter()
            .zip(&connected)
            .filter(|(_, &c)| c)
            .map(|(r, _)| r.center())
            .collect();
        for (k, room) in rooms.iter().enumerate() {
            if connected[k] {
                continue;
            }
            let c = room.center();
            let pool: Vec<(usize, usize)> = if anchors.is_empty() {
                rooms.iter().map(Room::center).filter(|&o| o != c).collect()
            } else {
                anchors.clone()
            };
            let target = pool
                .into_iter()
                .min_by_key(|o| c.0.abs_diff(o.0).pow(2) + c.1.abs_diff(o.1).pow(2))
                .unwrap_or(c);
            // Prefer clearing clutter along a layout path, so repair never
            // frees a cell the clutter-free layout had blocked.
            let lnav = layout_nav.get_or_insert_with(|| {
                let scene = Scene::from_occupancy(n, n, s, layout.clone(), seed).expect("layout keeps its border");
                scene.nav(cfg.agent_radius)
            });
            let goal = |idx: usize| nav.component((idx % n, idx / n)) == Some(largest);
            match layout_path(lnav, c.1 * n + c.0, goal) {
                Some(path) => {
                    let reach = (cfg.agent_radius / s).ceil() as i64 + 1;
                    for idx in path {
                        let (ci, cj) = ((idx % n) as i64, (idx / n) as i64);
                        for j in (cj - reach).max(0)..=(cj + reach).min(n as i64 - 1) {
                            for i in (ci - reach).max(0)..=(ci + reach).min(n as i64 - 1) {
                                let k = j as usize * n + i as usize;
                                canvas.occ[k] = layout[k];
                            }
                        }
                    }
                }
                None => canvas.carve_corridor(c, target, repair_width, true),
            }
        }
    }
    Err("connectivity repair did not converge".into())
}

/// Breadth-first search over the layout graph from `start` to the first
/// node satisfying `goal`; returns the visited path.
fn layout_path(nav: &NavGrid, start: usize, goal: impl Fn(usize) -> bool) -> Option<Vec<usize>> {
    if !nav.free_mask()[start] {
        return None;
    }
    let mut parent = vec![usize::MAX; nav.free_mask().len()];
    parent[start] = start;
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        if goal(u) {
            let mut path = vec![u];
            let mut v = u;
            while v != start {
                v = parent[v];
                path.push(v);
            }
            return Some(path);
        }
        for (v, _) in nav.neighbors(u) {
            if parent[v] == usize::MAX {
                parent[v] = u;
                queue.push_back(v);
            }
        }
    }
    None
}
