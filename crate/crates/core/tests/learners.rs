use ensemblekit_core::rng::SplitMix64;
use ensemblekit_core::scorers::stump::stump_candidates;
use ensemblekit_core::scorers::{
    train_forest, train_perceptron, train_stump, train_tree, ForestParams, MaxFeatures, PerceptronParams, TreeParams,
};
use ensemblekit_core::{ClassScorer, FeatureMatrix, Instance};
use proptest::prelude::*;

fn matrix(points: &[Vec<f64>]) -> FeatureMatrix {
    FeatureMatrix::from_columns(points.to_vec()).unwrap()
}

/// Minimum weighted error over every feature, every threshold between or
/// outside the observed values, and every pair of side labels.
fn stump_error_oracle(points: &[Vec<f64>], labels: &[usize], k: usize, w: &[f64]) -> f64 {
    let m = points[0].len();
    let mut best = f64::INFINITY;
    for f in 0..m {
        let mut values: Vec<f64> = points.iter().map(|p| p[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let mut thresholds = vec![values[0] - 1.0];
        thresholds.extend(values.windows(2).map(|p| (p[0] + p[1]) / 2.0));
        for t in thresholds {
            for lc in 0..k {
                for rc in 0..k {
                    let err: f64 = (0..points.len())
                        .filter(|&i| (if points[i][f] <= t { lc } else { rc }) != labels[i])
                        .map(|i| w[i])
                        .sum();
                    best = best.min(err);
                }
            }
        }
    }
    best
}

fn weighted_instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>, usize, Vec<f64>)> {
    (1usize..=5, 2usize..=50, 2usize..=4).prop_flat_map(|(m, n, k)| {
        (
            prop::collection::vec(prop::collection::vec(-4i32..=4, m), n),
            prop::collection::vec(0..k, n),
            Just(k),
            prop::collection::vec(0.01f64..1.0, n),
        )
            .prop_map(|(pts, labels, k, raw)| {
                let s: f64 = raw.iter().sum();
                let pts = pts
                    .into_iter()
                    .map(|p| p.into_iter().map(f64::from).collect())
                    .collect();
                (pts, labels, k, raw.into_iter().map(|x| x / s).collect())
            })
    })
}

proptest! {
    #[test]
    fn stump_error_equals_enumeration_minimum((pts, labels, k, w) in weighted_instance()) {
        let s = train_stump(&matrix(&pts), &labels, k, &w).unwrap();
        let oracle = stump_error_oracle(&pts, &labels, k, &w);
        prop_assert!((s.weighted_error - oracle).abs() <= 1e-12, "{} vs {}", s.weighted_error, oracle);
        let recomputed: f64 = (0..pts.len()).filter(|&i| s.predict(&pts[i]) != labels[i]).map(|i| w[i]).sum();
        prop_assert!((recomputed - s.weighted_error).abs() <= 1e-12);
        if k == 2 {
            prop_assert!(s.weighted_error <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn forest_is_reproducible(seed in any::<u64>()) {
        let mut rng = SplitMix64::new(seed);
        let pts: Vec<Vec<f64>> = (0..30).map(|_| (0..4).map(|_| rng.next_f64()).collect()).collect();
        let labels: Vec<usize> = (0..30).map(|_| rng.below(3)).collect();
        let p = ForestParams { n_estimators: 5, seed, ..ForestParams::default() };
        let a = train_forest(&matrix(&pts), &labels, 3, &p).unwrap();
        let b = train_forest(&matrix(&pts), &labels, 3, &p).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn candidate_splits_cover_all_midpoints() {
    let v = matrix(&[vec![0.0, 5.0], vec![2.0, 5.0], vec![2.0, 7.0]]);
    assert_eq!(stump_candidates(&v), vec![(0, 1.0), (1, 6.0)]);
}

#[test]
fn axis_separable_data_gives_perfect_depth_one_tree() {
    let mut rng = SplitMix64::new(11);
    let pts: Vec<Vec<f64>> = (0..40)
        .map(|_| vec![rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)])
        .collect();
    let labels: Vec<usize> = pts.iter().map(|p| usize::from(p[1] > 0.1)).collect();
    let tree = train_tree(
        &matrix(&pts),
        &labels,
        2,
        &TreeParams {
            max_depth: Some(1),
            ..TreeParams::default()
        },
    )
    .unwrap();
    assert_eq!(tree.depth(), 1);
    let acc = |pred: &dyn Fn(&[f64]) -> usize| (0..40).filter(|&i| pred(&pts[i]) == labels[i]).count() as f64 / 40.0;
    let tree_acc = acc(&|x| tree.predict(x));

    // Brute force over every axis and every threshold between observed values.
    let mut brute: f64 = 0.0;
    for f in 0..2 {
        let mut values: Vec<f64> = pts.iter().map(|p| p[f]).collect();
        values.sort_by(f64::total_cmp);
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            for flip in [false, true] {
                brute = brute.max(acc(&|x| usize::from((x[f] > t) != flip)));
            }
        }
    }
    assert_eq!(brute, 1.0);
    assert_eq!(tree_acc, brute);
}

#[test]
fn pure_node_is_a_single_leaf() {
    let tree = train_tree(
        &matrix(&[vec![1.0], vec![2.0], vec![3.0]]),
        &[2, 2, 2],
        3,
        &TreeParams::default(),
    )
    .unwrap();
    assert_eq!(tree.n_leaves(), 1);
    assert_eq!(
        tree.class_scores(Instance::vector(&[9.0])).unwrap(),
        vec![0.0, 0.0, 1.0]
    );
}

#[test]
fn sqrt_of_sixteen_features_is_four() {
    assert_eq!(MaxFeatures::Sqrt.resolve(16), 4);
    assert_eq!(MaxFeatures::Auto.resolve(16), 4);
    assert_eq!(MaxFeatures::Log2.resolve(16), 4);
}

fn orient(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Two 2-point classes are linearly separable iff their convex hulls (two
/// segments) are disjoint.
fn segments_intersect(p: &[Vec<f64>; 2], q: &[Vec<f64>; 2]) -> bool {
    let d1 = orient(&q[0], &q[1], &p[0]);
    let d2 = orient(&q[0], &q[1], &p[1]);
    let d3 = orient(&p[0], &p[1], &q[0]);
    let d4 = orient(&p[0], &p[1], &q[1]);
    d1 * d2 <= 0.0 && d3 * d4 <= 0.0
}

#[test]
fn xor_stays_misclassified_at_every_budget() {
    let pts = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
    let labels = [0, 0, 1, 1];
    assert!(segments_intersect(
        &[pts[0].clone(), pts[1].clone()],
        &[pts[2].clone(), pts[3].clone()]
    ));
    let v = matrix(&pts);
    for epochs in [1, 2, 5, 10, 50, 200] {
        for seed in 0..5 {
            let p = PerceptronParams {
                epochs,
                init_seed: seed,
                ..PerceptronParams::default()
            };
            let m = train_perceptron(&v, &labels, &p).unwrap();
            assert_eq!(m.epochs_run, epochs);
            assert!(m.epoch_errors.iter().all(|&e| e > 0));
            assert!(m.training_errors(&v, &labels) > 0);
        }
    }
}

#[test]
fn separable_points_are_learned() {
    let v = matrix(&[vec![-1.0], vec![1.0]]);
    for seed in 0..10 {
        let p = PerceptronParams::default().with_seed(seed);
        let m = train_perceptron(&v, &[0, 1], &p).unwrap();
        assert_eq!(m.training_errors(&v, &[0, 1]), 0);
        assert_eq!(train_perceptron(&v, &[0, 1], &p).unwrap(), m);
    }
}
