//! Occupancy-grid scenes, traversability queries and task sampling.
//!
//! A [`Scene`] is an immutable boolean grid (`true` = obstacle) whose border
//! cells are always blocked. Agent poses and goals are continuous points in
//! meters; the grid is only used to answer queries about them. Cell `(i, j)`
//! covers `[i·s, (i+1)·s) × [j·s, (j+1)·s)` for cell size `s`.

mod gen;
mod grid;
mod io;
pub(crate) mod sample;

use std::f64::consts::{PI, SQRT_2};
use std::sync::{Arc, Mutex, OnceLock};

pub use gen::{generate_scene, GenConfig};
pub use grid::NavGrid;
pub use io::{parse_scene, render_scene};
pub use sample::{sample_random_task, task_valid, TaskConstraints};

use crate::error::{Error, Result};

/// Default agent radius in meters.
pub const DEFAULT_AGENT_RADIUS: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Continuous agent pose. `heading` is in radians, wrapped into `[-π, π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: wrap_angle(heading),
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// A navigation task: start pose and goal position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Task {
    pub start: Pose,
    pub goal: Point,
}

/// Grid cell index `(column, row)`.
pub type Cell = (usize, usize);

pub struct Scene {
    width: usize,
    height: usize,
    cell_size: f64,
    occupancy: Vec<bool>,
    seed: u64,
    clearance: OnceLock<Vec<f64>>,
    nav_cache: Mutex<Vec<Arc<NavGrid>>>,
}

impl Clone for Scene {
    fn clone(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            cell_size: self.cell_size,
            occupancy: self.occupancy.clone(),
            seed: self.seed,
            clearance: self.clearance.clone(),
            nav_cache: Mutex::new(Vec::new()),
        }
    }
}

impl PartialEq for Scene {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.cell_size.to_bits() == other.cell_size.to_bits()
            && self.seed == other.seed
            && self.occupancy == other.occupancy
    }
}

impl std::fmt::Debug for Scene {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scene")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("cell_size", &self.cell_size)
            .field("seed", &self.seed)
            .field("free_cells", &self.free_cell_count())
            .finish()
    }
}

impl Scene {
    /// Builds a scene from a row-major occupancy grid (`occupancy[j * width + i]`).
    ///
    /// Fails if the dimensions disagree, the cell size is not positive, or a
    /// border cell is free.
    pub fn from_occupancy(
        width: usize,
        height: usize,
        cell_size: f64,
        occupancy: Vec<bool>,
        seed: u64,
    ) -> Result<Self> {
        if width < 3 || height < 3 {
            return Err(Error::Config(format!(
                "scene must be at least 3x3 cells, got {width}x{height}"
            )));
        }
        if occupancy.len() != width * height {
            return Err(Error::Config(format!(
                "occupancy has {} cells, expected {}",
                occupancy.len(),
                width * height
            )));
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::Config(format!("cell size must be positive, got {cell_size}")));
        }
        let scene = Self {
            width,
            height,
            cell_size,
            occupancy,
            seed,
            clearance: OnceLock::new(),
            nav_cache: Mutex::new(Vec::new()),
        };
        for i in 0..width {
            if !scene.occupied((i, 0)) || !scene.occupied((i, height - 1)) {
                return Err(Error::Config("border cells must be obstacles".into()));
            }
        }
        for j in 0..height {
            if !scene.occupied((0, j)) || !scene.occupied((width - 1, j)) {
                return Err(Error::Config("border cells must be obstacles".into()));
            }
        }
        Ok(scene)
    }

    /// A rectangular room: free interior enclosed by one ring of wall cells.
    pub fn empty_room(width: usize, height: usize, cell_size: f64) -> Self {
        let occupancy = (0..height)
            .flat_map(|j| (0..width).map(move |i| i == 0 || j == 0 || i == width - 1 || j == height - 1))
            .collect();
        Self::from_occupancy(width, height, cell_size, occupancy, 0).expect("valid room")
    }

    pub fn width_cells(&self) -> usize {
        self.width
    }

    pub fn height_cells(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    /// Extent in meters along x and y.
    pub fn extent(&self) -> (f64, f64) {
        (
            self.width as f64 * self.cell_size,
            self.height as f64 * self.cell_size,
        )
    }

    #[inline]
    pub fn index(&self, (i, j): Cell) -> usize {
        j * self.width + i
    }

    #[inline]
    pub fn occupied(&self, cell: Cell) -> bool {
        self.occupancy[self.index(cell)]
    }

    /// Occupancy lookup with out-of-grid cells reported as obstacles.
    #[inline]
    pub fn occupied_signed(&self, i: i64, j: i64) -> bool {
        if i < 0 || j < 0 || i >= self.width as i64 || j >= self.height as i64 {
            return true;
        }
        self.occupancy[j as usize * self.width + i as usize]
    }

    pub fn free_cell_count(&self) -> usize {
        self.occupancy.iter().filter(|&&o| !o).count()
    }

    /// Cell containing `p`, or `None` outside the grid.
    pub fn cell_of(&self, p: Point) -> Option<Cell> {
        if !(p.x.is_finite() && p.y.is_finite()) || p.x < 0.0 || p.y < 0.0 {
            return None;
        }
        let i = (p.x / self.cell_size).floor() as usize;
        let j = (p.y / self.cell_size).floor() as usize;
        (i < self.width && j < self.height).then_some((i, j))
    }

    pub fn cell_center(&self, (i, j): Cell) -> Point {
        Point::new(
            (i as f64 + 0.5) * self.cell_size,
            (j as f64 + 0.5) * self.cell_size,
        )
    }

    /// True iff every cell intersecting the open disc of `agent_radius`
    /// around `p` is free. Points outside the grid are not traversable; a
    /// non-positive radius checks only the containing cell.
    pub fn is_traversable(&self, p: Point, agent_radius: f64) -> bool {
        let Some(cell) = self.cell_of(p) else {
            return false;
        };
        if self.occupied(cell) {
            return false;
        }
        if agent_radius <= 0.0 {
            return true;
        }
        let s = self.cell_size;
        // Exact tangency (common on the grid, e.g. a wall 1.5 cells from a
        // cell center) must not depend on rounding, so touching counts as free.
        let r2 = agent_radius * agent_radius * (1.0 - 1e-9);
        let i0 = ((p.x - agent_radius) / s).floor() as i64;
        let i1 = ((p.x + agent_radius) / s).floor() as i64;
        let j0 = ((p.y - agent_radius) / s).floor() as i64;
        let j1 = ((p.y + agent_radius) / s).floor() as i64;
        for j in j0..=j1 {
            let y0 = j as f64 * s;
            let dy = (y0 - p.y).max(p.y - (y0 + s)).max(0.0);
            for i in i0..=i1 {
                if !self.occupied_signed(i, j) {
                    continue;
                }
                let x0 = i as f64 * s;
                let dx = (x0 - p.x).max(p.x - (x0 + s)).max(0.0);
                if dx * dx + dy * dy < r2 {
                    return false;
                }
            }
        }
        true
    }

    /// Per-cell Euclidean distance (meters) from each cell center to the
    /// nearest obstacle cell center. Computed once, exactly.
    pub fn clearance_field(&self) -> &[f64] {
        self.clearance.get_or_init(|| {
            grid::distance_transform(&self.occupancy, self.width, self.height)
                .into_iter()
                .map(|d2| d2.sqrt() * self.cell_size)
                .collect()
        })
    }

    /// Distance from `p` to the nearest obstacle cell center.
    ///
    /// Errors when `p` lies outside the grid or inside an obstacle cell.
    pub fn clearance(&self, p: Point) -> Result<f64> {
        let cell = self
            .cell_of(p)
            .filter(|&c| !self.occupied(c))
            .ok_or(Error::NotTraversable { x: p.x, y: p.y })?;
        let field = self.clearance_field();
        // The nearest obstacle to the containing cell's center bounds the search.
        let bound = field[self.index(cell)] + p.distance(self.cell_center(cell));
        let s = self.cell_size;
        let reach = (bound / s).ceil() as i64 + 1;
        let (ci, cj) = (cell.0 as i64, cell.1 as i64);
        let mut best2 = bound * bound;
        for j in (cj - reach).max(0)..=(cj + reach).min(self.height as i64 - 1) {
            let cy = (j as f64 + 0.5) * s - p.y;
            if cy * cy > best2 {
                continue;
            }
            for i in (ci - reach).max(0)..=(ci + reach).min(self.width as i64 - 1) {
                if !self.occupancy[j as usize * self.width + i as usize] {
                    continue;
                }
                let cx = (i as f64 + 0.5) * s - p.x;
                let d2 = cx * cx + cy * cy;
                if d2 < best2 {
                    best2 = d2;
                }
            }
        }
        Ok(best2.sqrt())
    }

    /// Radius of the free disc around `p`: the largest-inscribed-disc reading,
    /// which coincides with [`Scene::clearance`].
    pub fn island_radius(&self, p: Point) -> Result<f64> {
        self.clearance(p)
    }

    /// Navigation graph for an agent of the given radius (cached per radius).
    pub fn nav(&self, agent_radius: f64) -> Arc<NavGrid> {
        let mut cache = self.nav_cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(nav) = cache
            .iter()
            .find(|n| n.agent_radius().to_bits() == agent_radius.to_bits())
        {
            return Arc::clone(nav);
        }
        let nav = Arc::new(NavGrid::build(self, agent_radius));
        cache.push(Arc::clone(&nav));
        nav
    }

    /// Shortest traversable path length between the cells containing `a`
    /// and `b` on the 8-connected free-cell graph, or `None` if unreachable.
    pub fn geodesic_distance(&self, a: Point, b: Point, agent_radius: f64) -> Option<f64> {
        self.geodesic_within(a, b, agent_radius, f64::INFINITY)
    }

    /// Like [`Scene::geodesic_distance`] but gives up once every remaining
    /// path is longer than `max_distance` meters.
    pub fn geodesic_within(
        &self,
        a: Point,
        b: Point,
        agent_radius: f64,
        max_distance: f64,
    ) -> Option<f64> {
        let nav = self.nav(agent_radius);
        let ca = self.cell_of(a)?;
        let cb = self.cell_of(b)?;
        nav.shortest_path(ca, cb, max_distance / self.cell_size)
            .map(|steps| steps.length() * self.cell_size)
    }
}

/// Straight and diagonal move counts of a grid path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PathSteps {
    pub straight: u32,
    pub diagonal: u32,
}

impl PathSteps {
    /// Length in cell units.
    pub fn length(&self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * SQRT_2
    }
}
