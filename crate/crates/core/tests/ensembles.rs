mod support;

use ensemblekit_core::combiners::CombinerKind;
use ensemblekit_core::ensembles::{
    adaboost, bag_features, bag_samples, bagged_boosted_hmm, bagged_perceptron, build_bagged_ensemble,
    build_voting_stack, hmm_random_restarts, train_ensemble, AdaBoostParams, Bagging, SampleBagging, StopReason,
    WeakPool,
};
use ensemblekit_core::model::argmax_with_ties;
use ensemblekit_core::rng::SplitMix64;
use ensemblekit_core::scorers::{train_hmm, train_tree, HmmParams, PerceptronParams, TreeParams};
use ensemblekit_core::{ClassScorer, Classify, FeatureMatrix, Instance, Scorer};
use support::{reduction_pairs, scene_split, small_scene};

fn line(xs: &[f64]) -> FeatureMatrix {
    FeatureMatrix::from_columns(xs.iter().map(|&x| vec![x]).collect()).unwrap()
}

const XS: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

#[test]
fn samme_trace_on_binary_xor_line() {
    // Hand trace with exact weights:
    //  stage 1: split -1.5, sides (0, 1), err 1/4, alpha ln 3, weights -> (1/6, 1/6, 1/6, 1/2)
    //  stage 2: split  1.5, sides (1, 0), err 1/6, alpha ln 5, weights -> (1/2, 1/10, 1/10, 3/10)
    //  stage 3: every split ties at err 1/5; the lowest threshold -1.5 with sides (0, 0), alpha ln 4
    let b = adaboost(
        &line(&XS),
        &[0, 1, 1, 0],
        2,
        &AdaBoostParams {
            n_estimators: 3,
            ..AdaBoostParams::default()
        },
    )
    .unwrap();
    assert_eq!(b.stages.len(), 3);
    let expect = [
        (-1.5, 0, 1, 0.25, 3f64.ln()),
        (1.5, 1, 0, 1.0 / 6.0, 5f64.ln()),
        (-1.5, 0, 0, 0.2, 4f64.ln()),
    ];
    for (s, (thr, l, r, err, alpha)) in b.stages.iter().zip(expect) {
        assert_eq!(
            (s.stump.threshold, s.stump.left_class, s.stump.right_class),
            (thr, l, r)
        );
        assert!(close(s.error, err), "{} vs {err}", s.error);
        assert!(close(s.alpha, alpha), "{} vs {alpha}", s.alpha);
    }
    let preds: Vec<usize> = XS.iter().map(|&x| b.predict(&[x])).collect();
    assert_eq!(preds, vec![0, 1, 1, 0]);
    assert!(b.weight_sums.iter().all(|&s| (s - 1.0).abs() <= 1e-9));
}

#[test]
fn samme_trace_with_three_classes() {
    // K = 3 adds ln 2 to each stage weight:
    //  stage 1: split -1.5, sides (0, 0), err 1/2, alpha ln 1 + ln 2
    //  stage 2: split  0.0, sides (1, 2), err 1/3, alpha ln 2 + ln 2
    //  stage 3: split -1.5, sides (0, 0), err 1/3, alpha ln 2 + ln 2
    let b = adaboost(
        &line(&XS),
        &[0, 1, 2, 0],
        3,
        &AdaBoostParams {
            n_estimators: 3,
            ..AdaBoostParams::default()
        },
    )
    .unwrap();
    let expect = [
        (-1.5, 0, 0, 0.5, 2f64.ln()),
        (0.0, 1, 2, 1.0 / 3.0, 4f64.ln()),
        (-1.5, 0, 0, 1.0 / 3.0, 4f64.ln()),
    ];
    assert_eq!(b.stages.len(), 3);
    for (s, (thr, l, r, err, alpha)) in b.stages.iter().zip(expect) {
        assert_eq!(
            (s.stump.threshold, s.stump.left_class, s.stump.right_class),
            (thr, l, r)
        );
        assert!(close(s.error, err) && close(s.alpha, alpha), "{s:?}");
    }
}

#[test]
fn separable_line_is_fit_by_one_stage() {
    let labels = [0, 0, 1, 1];
    let b = adaboost(&line(&XS), &labels, 2, &AdaBoostParams::default()).unwrap();
    assert_eq!(b.stop, StopReason::PerfectFit);
    let mut previous = 0.0;
    for m in 1..=b.stages.len() {
        let acc = XS
            .iter()
            .zip(labels)
            .filter(|(&x, l)| b.predict_with(&[x], m) == *l)
            .count() as f64
            / 4.0;
        assert!(acc >= previous);
        previous = acc;
    }
    assert_eq!(previous, 1.0);
}

#[test]
fn stage_weights_stay_positive_and_normalized() {
    for seed in 0..20 {
        let mut rng = SplitMix64::new(seed);
        let k = 2 + rng.below(3);
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..3).map(|_| rng.uniform(0.0, 1.0)).collect())
            .collect();
        let labels: Vec<usize> = (0..40).map(|_| rng.below(k)).collect();
        for pool in [WeakPool::Retrain, WeakPool::FixedPool] {
            let p = AdaBoostParams {
                n_estimators: 25,
                learning_rate: 0.5,
                pool,
            };
            let Ok(b) = adaboost(&FeatureMatrix::from_columns(pts.clone()).unwrap(), &labels, k, &p) else {
                continue;
            };
            for s in &b.stages {
                assert!(s.alpha > 0.0 && s.alpha.is_finite());
                assert!(s.error < 1.0 - 1.0 / k as f64);
            }
            assert!(b.weight_sums.iter().all(|&s| (s - 1.0).abs() <= 1e-9));
        }
    }
}

#[test]
fn fixed_pool_never_reuses_a_split() {
    let mut rng = SplitMix64::new(4);
    let pts: Vec<Vec<f64>> = (0..30)
        .map(|_| vec![rng.below(5) as f64, rng.below(4) as f64])
        .collect();
    let labels: Vec<usize> = (0..30).map(|_| rng.below(2)).collect();
    let p = AdaBoostParams {
        n_estimators: 50,
        learning_rate: 1.0,
        pool: WeakPool::FixedPool,
    };
    let b = adaboost(&FeatureMatrix::from_columns(pts).unwrap(), &labels, 2, &p).unwrap();
    let mut splits: Vec<(Option<usize>, u64)> = b
        .stages
        .iter()
        .map(|s| (s.stump.feature, s.stump.threshold.to_bits()))
        .collect();
    let n = splits.len();
    splits.sort_unstable();
    splits.dedup();
    assert_eq!(splits.len(), n);
}

#[test]
fn reduced_builders_match_their_base() {
    let split = scene_split(&small_scene(3), 1);
    for (name, reduced, base) in reduction_pairs(17) {
        let (a, _) = train_ensemble(&reduced, &split.train, &split.train_labels, split.n_classes).unwrap();
        let (b, _) = train_ensemble(&base, &split.train, &split.train_labels, split.n_classes).unwrap();
        for x in split.test.instances() {
            assert_eq!(a.classify(x).unwrap(), b.classify(x).unwrap(), "{name}");
        }
    }
}

#[test]
fn single_member_stack_matches_member() {
    let split = scene_split(&small_scene(4), 1);
    let (_, base, _) = &reduction_pairs(1)[0];
    let (m, _) = train_ensemble(base, &split.train, &split.train_labels, split.n_classes).unwrap();
    let stack = build_voting_stack(vec![&m], 9).unwrap();
    for x in split.test.instances() {
        assert_eq!(stack.classify(x).unwrap(), m.classify(x).unwrap());
    }
}

#[test]
fn two_right_one_wrong_stack_is_perfect() {
    struct Oracle(bool);
    impl Classify for Oracle {
        fn n_classes(&self) -> usize {
            2
        }
        fn classify(&self, x: Instance<'_>) -> ensemblekit_core::Result<usize> {
            let truth = usize::from(x.features[0] > 0.0);
            Ok(if self.0 { truth } else { 1 - truth })
        }
    }
    let stack = build_voting_stack(vec![Oracle(true), Oracle(false), Oracle(true)], 0).unwrap();
    for i in -50..50 {
        let x = [i as f64 + 0.5];
        assert_eq!(stack.classify(Instance::vector(&x)).unwrap(), usize::from(x[0] > 0.0));
    }
}

fn hmm_params(seed: u64) -> HmmParams {
    HmmParams {
        n_components: 2,
        n_iter: 20,
        seed,
        ..HmmParams::default()
    }
}

#[test]
fn restarts_keep_the_most_likely_model() {
    let split = scene_split(&small_scene(5), 2);
    let v = split.train.select_columns(
        &(0..split.train.len())
            .filter(|&i| split.train_labels[i] == 0)
            .collect::<Vec<_>>(),
    );
    let out = hmm_random_restarts(&v, &hmm_params(8), 6).unwrap();
    let best = out.logliks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(out.best.train_loglik, best);
    assert_eq!(out.logliks[out.best_index], best);
    assert!(out.logliks.iter().all(|&l| out.best.train_loglik >= l));
    let single = hmm_random_restarts(&v, &hmm_params(8), 1).unwrap();
    assert_eq!(single.best, train_hmm(&v, &hmm_params(8)).unwrap());
}

/// Per-class bagged HMMs, recombined by hand from the stored members.
#[test]
fn bagged_hmm_decisions_are_averaged_member_scores() {
    let split = scene_split(&small_scene(6), 3);
    let mut per_class = Vec::new();
    for c in 0..2 {
        let cols: Vec<usize> = (0..split.train.len()).filter(|&i| split.train_labels[i] == c).collect();
        let v = split.train.select_columns(&cols);
        per_class.push(
            bagged_boosted_hmm(&v, &hmm_params(1), 1, 5, SampleBagging::default(), 40 + c as u64)
                .unwrap()
                .model,
        );
    }
    for x in split.test.instances() {
        let manual: Vec<f64> = per_class
            .iter()
            .map(|bag| {
                let scores: Vec<f64> = bag.members.iter().map(|m| m.model.score(x).unwrap()).collect();
                scores.iter().sum::<f64>() / scores.len() as f64
            })
            .collect();
        let combined: Vec<f64> = per_class.iter().map(|b| b.score(x).unwrap()).collect();
        for (a, b) in manual.iter().zip(&combined) {
            assert!((a - b).abs() <= 1e-9 * a.abs());
        }
        assert_eq!(argmax_with_ties(&manual, 0), argmax_with_ties(&combined, 0));
    }
}

#[test]
fn bagged_boosted_hmm_recombines_stored_members() {
    let split = scene_split(&small_scene(7), 3);
    let v = split.train.select_columns(
        &(0..split.train.len())
            .filter(|&i| split.train_labels[i] == 1)
            .collect::<Vec<_>>(),
    );
    let out = bagged_boosted_hmm(&v, &hmm_params(2), 3, 3, SampleBagging::default(), 5).unwrap();
    assert_eq!(out.model.members.len(), 3);
    for (bag, summary) in out.model.members.iter().zip(&out.bags) {
        assert_eq!(summary.logliks.len(), 3);
        assert_eq!(bag.model.train_loglik, summary.logliks[summary.best_index]);
    }
    for x in split.test.instances() {
        let manual = out.model.members.iter().map(|m| m.model.score(x).unwrap()).sum::<f64>() / 3.0;
        assert!((out.model.score(x).unwrap() - manual).abs() <= 1e-9 * manual.abs());
    }
    let reduced = bagged_boosted_hmm(
        &v,
        &hmm_params(2),
        4,
        1,
        SampleBagging {
            fraction: 1.0,
            replacement: false,
        },
        5,
    )
    .unwrap();
    assert_eq!(
        reduced.model.members[0].model,
        hmm_random_restarts(&v, &hmm_params(2), 4).unwrap().best
    );
}

#[test]
fn bags_are_reproducible_and_distinct() {
    let v = FeatureMatrix::from_columns((0..40).map(|i| vec![i as f64]).collect()).unwrap();
    let p = SampleBagging {
        fraction: 0.5,
        replacement: false,
    };
    let a = bag_samples(&v, 10, p, 99).unwrap();
    assert_eq!(a, bag_samples(&v, 10, p, 99).unwrap());
    for i in 0..10 {
        for j in i + 1..10 {
            assert_ne!(a[i], a[j]);
        }
    }
    let rows = FeatureMatrix::from_columns(vec![(0..8).map(f64::from).collect()]).unwrap();
    let b = bag_features(&rows, 5, 0.25, 3).unwrap();
    assert_eq!(b, bag_features(&rows, 5, 0.25, 3).unwrap());
    assert!(b.iter().all(|m| m.dim() == 2));
}

#[test]
fn feature_bagged_scoring_uses_the_stored_rows() {
    let mut rng = SplitMix64::new(12);
    let pts: Vec<Vec<f64>> = (0..60).map(|_| (0..8).map(|_| rng.next_f64()).collect()).collect();
    let labels: Vec<usize> = pts.iter().map(|p| usize::from(p[2] + p[5] > 1.0)).collect();
    let v = FeatureMatrix::from_columns(pts.clone()).unwrap();
    let tp = TreeParams::default();
    let bagged = build_bagged_ensemble(
        &v,
        &labels,
        4,
        &Bagging::features(0.5),
        CombinerKind::Average,
        6,
        |view, l| train_tree(view, l, 2, &tp),
    )
    .unwrap();
    for x in &pts {
        let mut sum = vec![0.0; 2];
        for m in &bagged.members {
            let projected: Vec<f64> = m.rows.as_ref().unwrap().iter().map(|&r| x[r]).collect();
            let s = m.model.class_scores(Instance::vector(&projected)).unwrap();
            sum.iter_mut().zip(s).for_each(|(a, b)| *a += b / 4.0);
        }
        assert_eq!(bagged.class_scores(Instance::vector(x)).unwrap(), sum);
    }
}

#[test]
fn bagged_trees_beat_a_single_tree_on_noisy_data() {
    let mut wins = 0;
    for rep in 0..10u64 {
        let mut rng = SplitMix64::new(500 + rep);
        let mut draw = |n: usize| -> (Vec<Vec<f64>>, Vec<usize>) {
            let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..6).map(|_| rng.next_f64()).collect()).collect();
            let labels = pts
                .iter()
                .map(|p| {
                    let clean = usize::from(p[0] + p[1] + 0.5 * p[2] > 1.25);
                    if rng.next_f64() < 0.2 {
                        1 - clean
                    } else {
                        clean
                    }
                })
                .collect();
            (pts, labels)
        };
        let (train, train_labels) = draw(200);
        let (test, test_labels) = draw(300);
        let v = FeatureMatrix::from_columns(train).unwrap();
        let tp = TreeParams {
            seed: rep,
            ..TreeParams::default()
        };
        let tree = train_tree(&v, &train_labels, 2, &tp).unwrap();
        let forest = build_bagged_ensemble(
            &v,
            &train_labels,
            100,
            &Bagging::both(0.8, 0.7),
            CombinerKind::Majority,
            rep,
            |view, l| train_tree(view, l, 2, &tp),
        )
        .unwrap();
        let acc = |f: &dyn Fn(&[f64]) -> usize| test.iter().zip(&test_labels).filter(|(x, &l)| f(x) == l).count();
        let single = acc(&|x| tree.predict(x));
        let bagged = acc(&|x| argmax_with_ties(&forest.class_scores(Instance::vector(x)).unwrap(), 0));
        if bagged >= single {
            wins += 1;
        }
    }
    assert!(wins >= 8, "bagging won {wins}/10");
}

#[test]
fn averaged_perceptron_has_averaged_weights() {
    let mut rng = SplitMix64::new(31);
    let pts: Vec<Vec<f64>> = (0..40)
        .map(|_| vec![rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)])
        .collect();
    let labels: Vec<usize> = pts.iter().map(|p| usize::from(p[0] - 0.5 * p[1] > 0.0)).collect();
    let v = FeatureMatrix::from_columns(pts).unwrap();
    let avg = bagged_perceptron(&v, &labels, &PerceptronParams::default(), 7).unwrap();
    assert_eq!(avg.components.len(), 7);
    for d in 0..2 {
        let mean = avg.components.iter().map(|c| c.weights[d]).sum::<f64>() / 7.0;
        assert!((avg.model.weights[d] - mean).abs() < 1e-12);
    }
    assert!(!avg.degenerate_margin);
    let single = bagged_perceptron(&v, &labels, &PerceptronParams::default(), 1).unwrap();
    assert_eq!(single.model.weights, single.components[0].weights);
}
