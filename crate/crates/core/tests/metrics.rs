mod common;

use navacl::metrics::{spearman, spl, PathOutcome};
use proptest::prelude::*;

#[test]
fn spl_examples() {
    assert!(common::spl_examples_hold());
    assert!(spl(&[]).is_err());
    let bad = PathOutcome {
        success: true,
        path_length: 1.0,
        shortest_path: 0.0,
    };
    assert!(spl(&[bad]).is_err());
}

#[test]
fn spl_is_bounded_by_success_rate() {
    assert!(common::spl_violation(10_000, 0).is_none());
}

proptest! {
    #[test]
    fn spearman_matches_closed_form_without_ties(perm in Just((0..30).collect::<Vec<usize>>()).prop_shuffle()) {
        let x: Vec<f64> = (0..perm.len()).map(|k| k as f64).collect();
        let y: Vec<f64> = perm.iter().map(|&k| (k as f64).powi(3) - 4.0).collect();
        let n = perm.len() as f64;
        let d2: f64 = perm.iter().enumerate().map(|(i, &k)| (i as f64 - k as f64).powi(2)).sum();
        let want = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
        prop_assert!((spearman(&x, &y) - want).abs() < 1e-12);
    }

    #[test]
    fn spearman_is_invariant_to_monotone_maps(xs in proptest::collection::vec(-100.0..100.0f64, 3..40), ys in proptest::collection::vec(-100.0..100.0f64, 40)) {
        let ys = &ys[..xs.len()];
        let r = spearman(&xs, ys);
        let mapped: Vec<f64> = xs.iter().map(|x| x.exp().ln_1p() * 3.0).collect();
        prop_assert!((spearman(&mapped, ys) - r).abs() < 1e-9);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r) || r.is_nan());
    }
}
