mod common;

use navacl::features::{compute_features, FeatureStats, normalize_features, TaskFeatures};
use navacl::seeding::{stream_rng, Stream};
use navacl::world::{generate_scene, sample_random_task, GenConfig, Point, Pose, Scene, Task, TaskConstraints};
use proptest::prelude::*;

/// Two 1 m wide vertical arms joined at the bottom.
fn u_corridor() -> Scene {
    let (w, h) = (50, 50);
    let mut occ = vec![true; w * h];
    let mut carve = |x0: usize, y0: usize, x1: usize, y1: usize| {
        for j in y0..=y1 {
            for i in x0..=x1 {
                occ[j * w + i] = false;
            }
        }
    };
    carve(5, 5, 14, 44);
    carve(35, 5, 44, 44);
    carve(5, 5, 44, 14);
    Scene::from_occupancy(w, h, 0.1, occ, 0).unwrap()
}

#[test]
fn u_corridor_path_complexity() {
    let scene = u_corridor();
    let c = TaskConstraints::default();
    let task = Task {
        start: Pose::new(1.0, 4.0, 0.0),
        goal: Point::new(4.0, 4.0),
    };
    let f = compute_features(&scene, &task, &c).unwrap();
    let mask = common::node_mask(&scene, c.agent_radius);
    let oracle = common::dijkstra(&scene, &mask, task.start.position(), task.goal).unwrap();
    assert_eq!(f.geodesic_distance, oracle);
    assert_eq!(f.path_complexity, 3.0 / oracle);
    assert!(f.path_complexity < 0.6);
}

#[test]
fn straight_ahead_is_aligned() {
    let scene = Scene::empty_room(60, 20, 0.1);
    let c = TaskConstraints::default();
    let task = Task {
        start: Pose::new(1.05, 1.05, 0.0),
        goal: Point::new(4.05, 1.05),
    };
    let f = compute_features(&scene, &task, &c).unwrap();
    assert_eq!((f.sin_turn, f.cos_turn), (0.0, 1.0));
    assert!((f.path_complexity - 1.0).abs() < 1e-12);
}

#[test]
fn standardization_zeroes_the_mean() {
    let scene = generate_scene(1, &GenConfig::default()).unwrap();
    let c = TaskConstraints::default();
    let mut rng = stream_rng(1, Stream::Normalization, 0, 0);
    let samples: Vec<TaskFeatures> = (0..500)
        .map(|_| compute_features(&scene, &sample_random_task(&scene, &mut rng, &c).unwrap(), &c).unwrap())
        .collect();
    let stats = FeatureStats::fit(&samples);
    let z: Vec<[f64; 8]> = samples.iter().map(|f| normalize_features(f, &stats)).collect();
    for k in 0..8 {
        let mean = z.iter().map(|v| v[k]).sum::<f64>() / z.len() as f64;
        let var = z.iter().map(|v| (v[k] - mean).powi(2)).sum::<f64>() / z.len() as f64;
        assert!(mean.abs() < 1e-9, "feature {k}");
        assert!((var - 1.0).abs() < 1e-9, "feature {k}");
    }
}

/// Pads a scene with `k` wall cells on the left and bottom.
fn shifted(scene: &Scene, k: usize) -> Scene {
    let (w, h) = (scene.width_cells(), scene.height_cells());
    let (nw, nh) = (w + k, h + k);
    let mut occ = vec![true; nw * nh];
    for j in 0..h {
        for i in 0..w {
            occ[(j + k) * nw + i + k] = scene.occupancy()[j * w + i];
        }
    }
    Scene::from_occupancy(nw, nh, scene.cell_size(), occ, scene.seed()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn feature_invariants(seed in 0u64..6, draw in 0u64..1000) {
        let cfg = GenConfig { scene_extent: 10.0, clutter_density: 0.1, ..GenConfig::default() };
        let scene = generate_scene(seed, &cfg).unwrap();
        let c = TaskConstraints::default();
        let mut rng = stream_rng(seed, Stream::Validation, draw, 0);
        let task = sample_random_task(&scene, &mut rng, &c).unwrap();
        let f = compute_features(&scene, &task, &c).unwrap();
        prop_assert!((f.sin_turn.powi(2) + f.cos_turn.powi(2) - 1.0).abs() < 1e-12);
        prop_assert!(f.path_complexity > 0.0);
        // The grid path can undercut the straight line by one cell diagonal.
        let slack = scene.cell_size() * std::f64::consts::SQRT_2;
        prop_assert!(f.path_complexity <= (f.geodesic_distance + slack) / f.geodesic_distance);
        prop_assert!(f.geodesic_distance >= c.min_task_distance && f.geodesic_distance <= c.max_task_distance);
        prop_assert!(f.agent_clearance >= c.agent_radius && f.goal_clearance >= c.agent_radius);
        prop_assert_eq!(f.agent_island, f.agent_clearance);
        prop_assert_eq!(f.goal_island, f.goal_clearance);

        // Translating scene and task by whole cells leaves the features unchanged.
        let k = 3;
        let moved = shifted(&scene, k);
        let d = k as f64 * scene.cell_size();
        let t2 = Task {
            start: Pose::new(task.start.x + d, task.start.y + d, task.start.heading),
            goal: Point::new(task.goal.x + d, task.goal.y + d),
        };
        let g = compute_features(&moved, &t2, &c).unwrap();
        for (a, b) in f.to_array().iter().zip(g.to_array()) {
            prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}
