//! Independent reference implementations shared by the integration tests.

#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::f64::consts::SQRT_2;

use navacl::world::{Point, Scene};

/// Node mask by brute force in exact half-cell integer units: a cell is a
/// node iff its center lies at distance >= `radius` from every obstacle
/// square (tangency is allowed).
pub fn node_mask(scene: &Scene, radius: f64) -> Vec<bool> {
    let (w, h) = (scene.width_cells(), scene.height_cells());
    let occ = scene.occupancy();
    let rh = 2.0 * radius / scene.cell_size();
    let reach = (radius / scene.cell_size()).ceil() as i64 + 1;
    let mut mask = vec![false; w * h];
    for j in 0..h as i64 {
        for i in 0..w as i64 {
            if occ[j as usize * w + i as usize] {
                continue;
            }
            let (cx, cy) = (2 * i + 1, 2 * j + 1);
            let gap = |c: i64, o: i64| (2 * o - c).max(c - 2 * (o + 1)).max(0);
            let mut ok = true;
            'scan: for oj in (j - reach).max(0)..=(j + reach).min(h as i64 - 1) {
                for oi in (i - reach).max(0)..=(i + reach).min(w as i64 - 1) {
                    if !occ[oj as usize * w + oi as usize] {
                        continue;
                    }
                    let d2 = gap(cx, oi).pow(2) + gap(cy, oj).pow(2);
                    if (d2 as f64) < rh * rh - 1e-6 {
                        ok = false;
                        break 'scan;
                    }
                }
            }
            mask[j as usize * w + i as usize] = ok;
        }
    }
    mask
}

fn cell_index(scene: &Scene, p: Point) -> Option<usize> {
    let s = scene.cell_size();
    if !(p.x >= 0.0 && p.y >= 0.0) {
        return None;
    }
    let (i, j) = ((p.x / s).floor() as usize, (p.y / s).floor() as usize);
    (i < scene.width_cells() && j < scene.height_cells()).then(|| j * scene.width_cells() + i)
}

fn neighbors(mask: &[bool], w: usize, idx: usize) -> Vec<(usize, bool)> {
    let h = mask.len() / w;
    let (i, j) = ((idx % w) as i64, (idx / w) as i64);
    let free = |a: i64, b: i64| a >= 0 && b >= 0 && (a as usize) < w && (b as usize) < h && mask[b as usize * w + a as usize];
    let mut out = Vec::new();
    for dj in -1..=1i64 {
        for di in -1..=1i64 {
            if di == 0 && dj == 0 || !free(i + di, j + dj) {
                continue;
            }
            let diag = di != 0 && dj != 0;
            if diag && !(free(i + di, j) && free(i, j + dj)) {
                continue;
            }
            out.push(((j + dj) as usize * w + (i + di) as usize, diag));
        }
    }
    out
}

/// Uniform-cost search over the node mask; returns meters.
pub fn dijkstra(scene: &Scene, mask: &[bool], a: Point, b: Point) -> Option<f64> {
    let (from, to) = (cell_index(scene, a)?, cell_index(scene, b)?);
    if !mask[from] || !mask[to] {
        return None;
    }
    let w = scene.width_cells();
    // Track exact (straight, diagonal) counts; order by their real length.
    let len = |c: (u32, u32)| c.0 as f64 + c.1 as f64 * SQRT_2;
    let mut best: Vec<Option<(u32, u32)>> = vec![None; mask.len()];
    let mut done = vec![false; mask.len()];
    let mut heap = BinaryHeap::new();
    best[from] = Some((0, 0));
    heap.push(Reverse((Ord64(0.0), from)));
    while let Some(Reverse((_, u))) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        let cu = best[u].unwrap();
        if u == to {
            return Some(len(cu) * scene.cell_size());
        }
        for (v, diag) in neighbors(mask, w, u) {
            let cv = if diag { (cu.0, cu.1 + 1) } else { (cu.0 + 1, cu.1) };
            if best[v].is_none_or(|old| len(cv) < len(old)) {
                best[v] = Some(cv);
                heap.push(Reverse((Ord64(len(cv)), v)));
            }
        }
    }
    None
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
struct Ord64(f64);
impl Eq for Ord64 {}
impl Ord for Ord64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Minimum distance from `p` to any obstacle cell center, over all cells.
pub fn clearance_brute(scene: &Scene, p: Point) -> f64 {
    let (w, s) = (scene.width_cells(), scene.cell_size());
    scene
        .occupancy()
        .iter()
        .enumerate()
        .filter(|(_, &o)| o)
        .map(|(k, _)| {
            let c = Point::new(((k % w) as f64 + 0.5) * s, ((k / w) as f64 + 0.5) * s);
            p.distance(c)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Cells reachable from `start` by breadth-first flood fill over the mask.
pub fn flood_fill(mask: &[bool], w: usize, start: usize) -> Vec<bool> {
    let mut seen = vec![false; mask.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(u) = queue.pop_front() {
        for (v, _) in neighbors(mask, w, u) {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Scene rotated by 90 degrees counter-clockwise: cell `(i, j)` moves to
/// `(h - 1 - j, i)`.
pub fn rotate_scene(scene: &Scene) -> Scene {
    let (w, h) = (scene.width_cells(), scene.height_cells());
    let occ = scene.occupancy();
    let mut out = vec![false; w * h];
    for j in 0..h {
        for i in 0..w {
            let (ni, nj) = (h - 1 - j, i);
            out[nj * h + ni] = occ[j * w + i];
        }
    }
    Scene::from_occupancy(h, w, scene.cell_size(), out, scene.seed()).unwrap()
}

pub fn rotate_point(scene: &Scene, p: Point) -> Point {
    Point::new(scene.height_cells() as f64 * scene.cell_size() - p.y, p.x)
}

/// Area under the ROC curve by pairwise comparison (ties count half).
pub fn auc(scores: &[f64], labels: &[bool]) -> f64 {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|x| *x.1).map(|x| *x.0).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|x| !*x.1).map(|x| *x.0).collect();
    let mut wins = 0.0;
    for &p in &pos {
        for &n in &neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

/// Largest per-tensor relative error between an analytic gradient and
/// central finite differences of `loss` with step `eps`.
pub fn grad_check(
    params: &mut [f64],
    analytic: &[f64],
    tensors: &[Vec<usize>],
    eps: f64,
    mut loss: impl FnMut(&[f64]) -> f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for indices in tensors {
        let (mut diff, mut norm_a, mut norm_n) = (0.0, 0.0, 0.0);
        for &k in indices {
            let orig = params[k];
            params[k] = orig + eps;
            let up = loss(params);
            params[k] = orig - eps;
            let down = loss(params);
            params[k] = orig;
            let numeric = (up - down) / (2.0 * eps);
            diff += (analytic[k] - numeric).powi(2);
            norm_a += analytic[k].powi(2);
            norm_n += numeric.powi(2);
        }
        let scale = norm_a.sqrt() + norm_n.sqrt();
        if scale > 1e-10 {
            worst = worst.max(diff.sqrt() / scale);
        }
    }
    worst
}

pub fn layer_tensors(layers: &navacl::nn::Layers) -> Vec<Vec<usize>> {
    layers.shapes.iter().flat_map(|s| [s.weight_range().collect(), s.bias_range().collect()]).collect()
}

/// Gradient check of the predictor's cross-entropy loss on one random draw.
pub fn predictor_grad_error(draw: u64) -> f64 {
    use navacl::predictor::{Mlp, LAYER_SIZES};
    use rand::Rng;
    let mut rng = navacl::seeding::stream_rng(draw, navacl::seeding::Stream::Validation, 77, 0);
    let mut mlp = Mlp::glorot(&LAYER_SIZES, &mut rng);
    for p in mlp.layers.params.iter_mut() {
        *p += rng.random_range(-0.05..0.05);
    }
    let batch = 6;
    let x: Vec<f64> = (0..batch * LAYER_SIZES[0]).map(|_| rng.random_range(-2.0..2.0)).collect();
    let y: Vec<f64> = (0..batch).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect();
    let mut grad = Vec::new();
    mlp.bce_loss_and_grad(&x, &y, Some(&mut grad));
    let tensors = layer_tensors(&mlp.layers);
    let mut params = mlp.layers.params.clone();
    grad_check(&mut params, &grad, &tensors, 1e-5, |p| {
        mlp.layers.params.copy_from_slice(p);
        mlp.bce_loss_and_grad(&x, &y, None)
    })
}

/// Gradient check of the full PPO loss on a tiny policy (4 inputs, one
/// hidden layer of 8 units) with a mix of clipped and unclipped ratios.
pub fn policy_grad_error(draw: u64) -> f64 {
    policy_grad_error_sized(draw, 4, &[8], None)
}

/// As [`policy_grad_error`] for any architecture; `sample` limits the check
/// to that many random coordinates per tensor.
pub fn policy_grad_error_sized(draw: u64, obs_dim: usize, hidden: &[usize], sample: Option<usize>) -> f64 {
    use navacl::ppo::{log_softmax, ppo_loss_and_grad, Policy, PolicyCache, UpdateBatch, ACTIONS};
    use rand::seq::IndexedRandom;
    use rand::Rng;
    let mut rng = navacl::seeding::stream_rng(draw, navacl::seeding::Stream::Validation, 78, 0);
    let n = 8;
    let mut policy = Policy::new(obs_dim, hidden, &mut rng);
    for p in policy.layers.params.iter_mut() {
        *p += rng.random_range(-0.3..0.3);
    }
    let observations: Vec<f64> = (0..n * obs_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let actions: Vec<usize> = (0..n).map(|_| rng.random_range(0..ACTIONS)).collect();
    let mut cache = PolicyCache::default();
    policy.forward_batch(&observations, n, &mut cache);
    let old_log_probs = (0..n)
        .map(|i| log_softmax(&cache.logits[i * ACTIONS..(i + 1) * ACTIONS])[actions[i]] + rng.random_range(-0.3..0.3))
        .collect();
    let batch = UpdateBatch {
        obs_dim,
        observations,
        actions,
        old_log_probs,
        advantages: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
        returns: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    };
    let (clip, c1, c2) = (0.1, 0.5, 0.01);
    let mut grad = vec![0.0; policy.layers.len()];
    ppo_loss_and_grad(&policy, &batch, clip, c1, c2, &mut cache, Some(&mut grad));
    let mut tensors = layer_tensors(&policy.layers);
    if let Some(k) = sample {
        for t in tensors.iter_mut() {
            *t = t.choose_multiple(&mut rng, k).copied().collect();
        }
    }
    let mut params = policy.layers.params.clone();
    grad_check(&mut params, &grad, &tensors, 1e-5, |p| {
        policy.layers.params.copy_from_slice(p);
        ppo_loss_and_grad(&policy, &batch, clip, c1, c2, &mut cache, None).total
    })
}

/// Random synthetic episode sets; returns the first set violating
/// `0 <= spl <= success_rate <= 1`, if any.
pub fn spl_violation(sets: usize, seed: u64) -> Option<Vec<navacl::metrics::PathOutcome>> {
    use navacl::metrics::{spl, success_rate, PathOutcome};
    use rand::Rng;
    let mut rng = navacl::seeding::stream_rng(seed, navacl::seeding::Stream::Validation, 30, 0);
    for _ in 0..sets {
        let n = rng.random_range(1..40);
        let set: Vec<PathOutcome> = (0..n)
            .map(|_| {
                let p = rng.random_range(0.01..10.0);
                PathOutcome {
                    success: rng.random_bool(0.5),
                    path_length: rng.random_range(0.0..30.0),
                    shortest_path: p,
                }
            })
            .collect();
        let (s, r) = (spl(&set).unwrap(), success_rate(&set).unwrap());
        if !(0.0..=1.0).contains(&s) || s > r + 1e-15 || !(0.0..=1.0).contains(&r) {
            return Some(set);
        }
    }
    None
}

/// The three worked SPL examples.
pub fn spl_examples_hold() -> bool {
    use navacl::metrics::{spl, PathOutcome};
    let ok = |p: &[PathOutcome], want: f64| spl(p).unwrap() == want;
    let po = |success, l, p| PathOutcome {
        success,
        path_length: l,
        shortest_path: p,
    };
    ok(&[po(true, 3.0, 3.0)], 1.0) && ok(&[po(false, 3.0, 3.0)], 0.0) && ok(&[po(true, 4.0, 2.0), po(false, 1.0, 2.0)], 0.25)
}
