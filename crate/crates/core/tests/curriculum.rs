use navacl::curriculum::{
    get_dynamic_task, get_goid_task, get_task_type, get_uniform_task, serve_task, CurriculumConfig, CurriculumMode,
    Schedule, TaskSource, TaskType,
};
use navacl::features::{FeatureStats, FEATURE_COUNT};
use navacl::predictor::{DifficultyStats, Mlp, Predictor, SIGMA_FLOOR};
use navacl::seeding::{stream_rng, Stream};
use navacl::world::{generate_scene, sample_random_task, GenConfig, Scene, TaskConstraints};
use proptest::prelude::*;

fn scene() -> Scene {
    generate_scene(5, &GenConfig::default()).unwrap()
}

fn zero_predictor() -> Predictor {
    Predictor {
        mlp: Mlp::zeros(&[FEATURE_COUNT, 4, 1]),
        feature_stats: FeatureStats::default(),
    }
}

/// `sigmoid(k (c - geodesic))`, built as a one-unit chain through a ReLU.
fn distance_predictor(k: f64, c: f64) -> Predictor {
    let mut mlp = Mlp::zeros(&[FEATURE_COUNT, 1, 1]);
    let shapes = mlp.layers.shapes.clone();
    let p = &mut mlp.layers.params;
    // Hidden unit: relu(geodesic) = geodesic, since distances are positive.
    p[shapes[0].weight_range().start] = 1.0;
    p[shapes[1].weight_range().start] = -k;
    p[shapes[1].bias_range().start] = k * c;
    Predictor {
        mlp,
        feature_stats: FeatureStats::default(),
    }
}

#[test]
fn task_type_frequencies_at_start() {
    let schedule = Schedule::default();
    let mut rng = stream_rng(0, Stream::Rollout, 0, 0);
    let mut counts = [0usize; 3];
    for _ in 0..10_000 {
        counts[match get_task_type(0, &schedule, &mut rng) {
            TaskType::Easy => 0,
            TaskType::Frontier => 1,
            _ => 2,
        }] += 1;
    }
    for (c, want) in counts.iter().zip([0.4, 0.4, 0.2]) {
        assert!((*c as f64 / 10_000.0 - want).abs() <= 0.02, "{counts:?}");
    }
}

#[test]
fn after_decay_only_random() {
    let schedule = Schedule::default();
    let mut rng = stream_rng(0, Stream::Rollout, 1, 0);
    for t in [schedule.decay_steps, schedule.decay_steps + 1, 10 * schedule.decay_steps] {
        for _ in 0..200 {
            assert_eq!(get_task_type(t, &schedule, &mut rng), TaskType::Random);
        }
    }
}

#[test]
fn constant_predictor_falls_back_after_cap() {
    let scene = scene();
    let c = TaskConstraints::default();
    let source = TaskSource {
        scenes: std::slice::from_ref(&scene),
        constraints: &c,
    };
    let predictor = zero_predictor();
    let stats = DifficultyStats::from_predictions(&[0.5; 16]);
    assert_eq!(stats.sigma_f, SIGMA_FLOOR);
    let cfg = CurriculumConfig {
        schedule: Schedule {
            start: [1.0, 0.0, 0.0],
            end: [1.0, 0.0, 0.0],
            decay_steps: 1,
        },
        ..CurriculumConfig::default()
    };
    let mut rng = stream_rng(0, Stream::Rollout, 2, 0);
    for _ in 0..5 {
        let served = get_dynamic_task(&predictor, &stats, &source, &mut rng, 0, &cfg).unwrap();
        assert_eq!(served.task_type, TaskType::Easy);
        assert!(served.fallback);
        assert_eq!(served.attempts, cfg.attempt_cap);
    }
}

#[test]
fn random_type_accepts_first_draw() {
    let scene = scene();
    let c = TaskConstraints::default();
    let source = TaskSource {
        scenes: std::slice::from_ref(&scene),
        constraints: &c,
    };
    let cfg = CurriculumConfig {
        schedule: Schedule {
            start: [0.0, 0.0, 1.0],
            end: [0.0, 0.0, 1.0],
            decay_steps: 1,
        },
        ..CurriculumConfig::default()
    };
    let stats = DifficultyStats::from_predictions(&[0.5]);
    let served = get_dynamic_task(&zero_predictor(), &stats, &source, &mut stream_rng(1, Stream::Rollout, 0, 0), 0, &cfg).unwrap();
    assert_eq!((served.task_type, served.fallback, served.attempts), (TaskType::Random, false, 1));
}

#[test]
fn easy_tasks_are_shorter_under_monotone_predictor() {
    let scene = scene();
    let c = TaskConstraints::default();
    let source = TaskSource {
        scenes: std::slice::from_ref(&scene),
        constraints: &c,
    };
    let predictor = distance_predictor(1.0, 5.0);
    let mut rng = stream_rng(4, Stream::Stats, 0, 0);
    let preds: Vec<f64> = (0..512)
        .map(|_| {
            let t = sample_random_task(&scene, &mut rng, &c).unwrap();
            predictor.predict_features(&navacl::features::compute_features(&scene, &t, &c).unwrap())
        })
        .collect();
    let stats = DifficultyStats::from_predictions(&preds);
    let only = |w: [f64; 3]| CurriculumConfig {
        schedule: Schedule {
            start: w,
            end: w,
            decay_steps: 1,
        },
        ..CurriculumConfig::default()
    };
    let mean_geo = |cfg: &CurriculumConfig, seed: u64| {
        let mut rng = stream_rng(seed, Stream::Rollout, 0, 0);
        let served: Vec<_> = (0..1000)
            .map(|_| get_dynamic_task(&predictor, &stats, &source, &mut rng, 0, cfg).unwrap())
            .collect();
        assert!(served.iter().all(|s| !s.fallback));
        served.iter().map(|s| s.features.geodesic_distance).sum::<f64>() / served.len() as f64
    };
    let easy = mean_geo(&only([1.0, 0.0, 0.0]), 5);
    let random = mean_geo(&only([0.0, 0.0, 1.0]), 6);
    assert!(easy < random, "easy {easy} random {random}");
}

#[test]
fn goid_serves_inside_band() {
    let scene = scene();
    let c = TaskConstraints::default();
    let source = TaskSource {
        scenes: std::slice::from_ref(&scene),
        constraints: &c,
    };
    let predictor = distance_predictor(1.0, 5.0);
    let cfg = CurriculumConfig::default();
    let mut rng = stream_rng(7, Stream::Rollout, 0, 0);
    for _ in 0..200 {
        let s = get_goid_task(&predictor, &source, &mut rng, &cfg).unwrap();
        assert_eq!(s.task_type, TaskType::Goid);
        assert!(s.fallback || (0.4..=0.6).contains(&s.predicted_success));
    }
}

#[test]
fn uniform_mode_matches_random_sampler() {
    let scene = scene();
    let c = TaskConstraints::default();
    let source = TaskSource {
        scenes: std::slice::from_ref(&scene),
        constraints: &c,
    };
    let predictor = distance_predictor(1.0, 5.0);
    let cfg = CurriculumConfig {
        mode: CurriculumMode::Uniform,
        ..CurriculumConfig::default()
    };
    let stats = DifficultyStats::from_predictions(&[0.5]);
    let mut a = stream_rng(9, Stream::Rollout, 0, 0);
    let mut b = stream_rng(9, Stream::Rollout, 0, 0);
    for t in 0..100 {
        let served = serve_task(&predictor, &stats, &source, &mut a, t, &cfg).unwrap();
        let plain = sample_random_task(&scene, &mut b, &c).unwrap();
        assert_eq!(served.task, plain);
        assert_eq!((served.task_type, served.fallback, served.attempts), (TaskType::Random, false, 1));
    }
    let direct = get_uniform_task(&predictor, &source, &mut stream_rng(9, Stream::Rollout, 0, 0)).unwrap();
    assert_eq!(direct.task, sample_random_task(&scene, &mut stream_rng(9, Stream::Rollout, 0, 0), &c).unwrap());
}

proptest! {
    #[test]
    fn schedule_weights_are_a_distribution(
        start in proptest::array::uniform3(0.0..1.0f64),
        end in proptest::array::uniform3(0.0..1.0f64),
        decay in 1u64..1_000_000,
        t in 0u64..2_000_000,
    ) {
        prop_assume!(start.iter().sum::<f64>() > 1e-3 && end.iter().sum::<f64>() > 1e-3);
        let w = Schedule { start, end, decay_steps: decay }.weights(t);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|&v| v >= 0.0));
    }
}
