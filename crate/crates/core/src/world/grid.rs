use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::f64::consts::SQRT_2;

use super::{Cell, PathSteps, Scene};

const NONE: u32 = u32::MAX;

/// Exact squared Euclidean distance transform (cell units) from each cell
/// center to the nearest `true` cell center. Separable lower-envelope method.
pub(crate) fn distance_transform(obstacle: &[bool], width: usize, height: usize) -> Vec<f64> {
    let inf = 1e20;
    let mut out: Vec<f64> = obstacle.iter().map(|&o| if o { 0.0 } else { inf }).collect();
    let n = width.max(height);
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];

    for i in 0..width {
        for j in 0..height {
            f[j] = out[j * width + i];
        }
        lower_envelope(&f[..height], &mut d[..height], &mut v, &mut z);
        for j in 0..height {
            out[j * width + i] = d[j];
        }
    }
    for j in 0..height {
        let row = &mut out[j * width..(j + 1) * width];
        f[..width].copy_from_slice(row);
        lower_envelope(&f[..width], &mut d[..width], &mut v, &mut z);
        row.copy_from_slice(&d[..width]);
    }
    out
}

fn lower_envelope(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s;
        loop {
            let p = v[k];
            s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * q as f64 - 2.0 * p as f64);
            // z[0] is -inf, so this never walks below the first parabola.
            if s <= z[k] {
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, dq) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let diff = q as f64 - p as f64;
        *dq = diff * diff + f[p];
    }
}

/// Free-cell navigation graph for one agent radius.
///
/// A cell is a node iff an agent centered on the cell center is traversable.
/// Nodes connect to their 8 neighbors; a diagonal move additionally requires
/// both orthogonally adjacent cells to be nodes, so paths never cut corners.
#[derive(Debug)]
pub struct NavGrid {
    width: usize,
    height: usize,
    agent_radius: f64,
    free: Vec<bool>,
    component: Vec<u32>,
    component_sizes: Vec<usize>,
    open_cells: Vec<u32>,
}

#[derive(Default)]
struct Scratch {
    stamp: Vec<u32>,
    generation: u32,
    g: Vec<f64>,
    steps: Vec<PathSteps>,
    closed: Vec<u32>,
    heap: BinaryHeap<Open>,
}

thread_local! {
    static SCRATCH: RefCell<Scratch> = RefCell::new(Scratch::default());
}

#[derive(Clone, Copy)]
struct Open {
    f: f64,
    g: f64,
    idx: u32,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Open {}
impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on f; prefer deeper nodes on ties, then lower index.
        other
            .f
            .total_cmp(&self.f)
            .then(self.g.total_cmp(&other.g))
            .then(other.idx.cmp(&self.idx))
    }
}

const OFFSETS: [(i64, i64, bool); 8] = [
    (1, 0, false),
    (-1, 0, false),
    (0, 1, false),
    (0, -1, false),
    (1, 1, true),
    (1, -1, true),
    (-1, 1, true),
    (-1, -1, true),
];

impl NavGrid {
    pub(crate) fn build(scene: &Scene, agent_radius: f64) -> Self {
        let (width, height) = (scene.width, scene.height);
        let free: Vec<bool> = (0..height)
            .flat_map(|j| (0..width).map(move |i| (i, j)))
            .map(|c| scene.is_traversable(scene.cell_center(c), agent_radius))
            .collect();
        let open_cells = scene
            .occupancy
            .iter()
            .enumerate()
            .filter(|(_, &o)| !o)
            .map(|(k, _)| k as u32)
            .collect();
        let mut nav = Self {
            width,
            height,
            agent_radius,
            free,
            component: vec![NONE; width * height],
            component_sizes: Vec::new(),
            open_cells,
        };
        nav.label_components();
        nav
    }

    fn label_components(&mut self) {
        let mut queue = VecDeque::new();
        let mut next_nodes = Vec::with_capacity(8);
        for start in 0..self.free.len() {
            if !self.free[start] || self.component[start] != NONE {
                continue;
            }
            let label = self.component_sizes.len() as u32;
            let mut size = 0;
            self.component[start] = label;
            queue.push_back(start);
            while let Some(idx) = queue.pop_front() {
                size += 1;
                next_nodes.clear();
                next_nodes.extend(self.neighbors(idx).map(|(n, _)| n));
                for &next in &next_nodes {
                    if self.component[next] == NONE {
                        self.component[next] = label;
                        queue.push_back(next);
                    }
                }
            }
            self.component_sizes.push(size);
        }
    }

    pub fn agent_radius(&self) -> f64 {
        self.agent_radius
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn is_free(&self, (i, j): Cell) -> bool {
        i < self.width && j < self.height && self.free[j * self.width + i]
    }

    pub fn free_mask(&self) -> &[bool] {
        &self.free
    }

    pub fn component(&self, (i, j): Cell) -> Option<u32> {
        if i >= self.width || j >= self.height {
            return None;
        }
        let c = self.component[j * self.width + i];
        (c != NONE).then_some(c)
    }

    pub fn component_size(&self, label: u32) -> usize {
        self.component_sizes[label as usize]
    }

    /// Size of the largest connected component in cells (0 if none).
    pub fn largest_component(&self) -> Option<(u32, usize)> {
        self.component_sizes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(l, &s)| (l as u32, s))
    }

    /// Cells whose occupancy is free, in row-major order.
    pub(crate) fn open_cells(&self) -> &[u32] {
        &self.open_cells
    }

    /// Graph neighbors of a node as `(index, is_diagonal)`.
    pub fn neighbors(&self, idx: usize) -> impl Iterator<Item = (usize, bool)> + '_ {
        let (i, j) = ((idx % self.width) as i64, (idx / self.width) as i64);
        OFFSETS.iter().filter_map(move |&(di, dj, diag)| {
            let ok = |a: i64, b: i64| {
                a >= 0
                    && b >= 0
                    && (a as usize) < self.width
                    && (b as usize) < self.height
                    && self.free[b as usize * self.width + a as usize]
            };
            let (ni, nj) = (i + di, j + dj);
            if !ok(ni, nj) || (diag && !(ok(i + di, j) && ok(i, j + dj))) {
                return None;
            }
            Some((nj as usize * self.width + ni as usize, diag))
        })
    }

    /// A* with the octile heuristic. `bound` is in cell units; nodes whose
    /// estimated total exceeds it are not expanded.
    pub fn shortest_path(&self, from: Cell, to: Cell, bound: f64) -> Option<PathSteps> {
        if !self.is_free(from) || !self.is_free(to) {
            return None;
        }
        if self.component(from) != self.component(to) {
            return None;
        }
        if from == to {
            return Some(PathSteps::default());
        }
        let heuristic = |idx: usize| {
            let dx = (idx % self.width).abs_diff(to.0) as f64;
            let dy = (idx / self.width).abs_diff(to.1) as f64;
            let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
            (hi - lo) + lo * SQRT_2
        };
        let start = from.1 * self.width + from.0;
        let goal = to.1 * self.width + to.0;
        if heuristic(start) > bound + 1e-9 {
            return None;
        }
        SCRATCH.with(|scratch| {
            let mut s = scratch.borrow_mut();
            let n = self.free.len();
            if s.stamp.len() < n {
                s.stamp = vec![0; n];
                s.closed = vec![0; n];
                s.g = vec![0.0; n];
                s.steps = vec![PathSteps::default(); n];
                s.generation = 0;
            }
            s.generation = s.generation.wrapping_add(1);
            if s.generation == 0 {
                s.stamp.iter_mut().for_each(|x| *x = 0);
                s.closed.iter_mut().for_each(|x| *x = 0);
                s.generation = 1;
            }
            let gen = s.generation;
            s.heap.clear();
            s.stamp[start] = gen;
            s.g[start] = 0.0;
            s.steps[start] = PathSteps::default();
            let h0 = heuristic(start);
            s.heap.push(Open {
                f: h0,
                g: 0.0,
                idx: start as u32,
            });
            while let Some(Open { g, idx, .. }) = s.heap.pop() {
                let idx = idx as usize;
                if s.closed[idx] == gen || g > s.g[idx] {
                    continue;
                }
                if idx == goal {
                    return Some(s.steps[idx]);
                }
                s.closed[idx] = gen;
                let base = s.steps[idx];
                for (next, diag) in self.neighbors(idx) {
                    if s.closed[next] == gen {
                        continue;
                    }
                    let mut steps = base;
                    if diag {
                        steps.diagonal += 1;
                    } else {
                        steps.straight += 1;
                    }
                    let ng = steps.length();
                    if s.stamp[next] == gen && ng >= s.g[next] {
                        continue;
                    }
                    let f = ng + heuristic(next);
                    if f > bound + 1e-9 {
                        continue;
                    }
                    s.stamp[next] = gen;
                    s.g[next] = ng;
                    s.steps[next] = steps;
                    s.heap.push(Open {
                        f,
                        g: ng,
                        idx: next as u32,
                    });
                }
            }
            None
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_transform_matches_brute_force() {
        let (w, h) = (13, 9);
        let obstacle: Vec<bool> = (0..w * h).map(|k| (k * 7919) % 11 == 0).collect();
        let dt = distance_transform(&obstacle, w, h);
        for j in 0..h {
            for i in 0..w {
                let mut best = f64::INFINITY;
                for q in 0..h {
                    for p in 0..w {
                        if obstacle[q * w + p] {
                            let d = (i as f64 - p as f64).powi(2) + (j as f64 - q as f64).powi(2);
                            best = best.min(d);
                        }
                    }
                }
                assert_eq!(dt[j * w + i], best, "cell ({i},{j})");
            }
        }
    }

    #[test]
    fn no_corner_cutting() {
        // Two free cells touching only diagonally are not connected.
        let mut occ = vec![true; 16];
        occ[5] = false; // (1,1)
        occ[10] = false; // (2,2)
        let scene = Scene::from_occupancy(4, 4, 1.0, occ, 0).unwrap();
        let nav = scene.nav(0.0);
        assert_eq!(nav.shortest_path((1, 1), (2, 2), f64::INFINITY), None);
    }

    #[test]
    fn bound_prunes() {
        let scene = Scene::empty_room(20, 5, 0.1);
        let nav = scene.nav(0.0);
        assert!(nav.shortest_path((1, 2), (18, 2), 17.0).is_some());
        assert!(nav.shortest_path((1, 2), (18, 2), 16.5).is_none());
    }
}
