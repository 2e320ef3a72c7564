use ensemblekit_core::combiners::{
    apply_meta, combine_average, combine_majority, combine_max, majority_vote, train_meta_combiner, MetaParams,
};
use ensemblekit_core::model::threshold_classifier;
use ensemblekit_core::rng::SplitMix64;
use ensemblekit_core::{Classify, Instance, Result, Scorer};
use proptest::prelude::*;

/// Position-wise majority over rows of correctness indicators, where the
/// true class of every position is 1.
fn vote_columns(rows: &[[usize; 10]; 3]) -> Vec<usize> {
    (0..10)
        .map(|j| combine_majority(&[rows[0][j], rows[1][j], rows[2][j]], 2, j as u64).unwrap())
        .collect()
}

fn accuracy(c: &[usize]) -> f64 {
    c.iter().filter(|&&x| x == 1).count() as f64 / c.len() as f64
}

#[test]
fn correlated_triple_votes_to_eighty_percent() {
    let s = [
        [1, 1, 1, 1, 1, 1, 1, 1, 0, 0],
        [1, 1, 1, 1, 1, 1, 1, 1, 0, 0],
        [1, 0, 1, 1, 1, 1, 1, 1, 0, 0],
    ];
    let c = vote_columns(&s);
    assert_eq!(c, vec![1, 1, 1, 1, 1, 1, 1, 1, 0, 0]);
    assert_eq!(accuracy(&c), 0.8);
}

#[test]
fn less_correlated_triple_votes_to_ninety_percent() {
    let s = [
        [1, 1, 1, 1, 1, 1, 1, 1, 0, 0],
        [0, 1, 1, 1, 0, 1, 1, 1, 0, 1],
        [1, 0, 0, 0, 1, 0, 1, 1, 1, 1],
    ];
    assert_eq!(s.map(|r| accuracy(&r)), [0.8, 0.7, 0.6]);
    let c = vote_columns(&s);
    assert_eq!(c, vec![1, 1, 1, 1, 1, 1, 1, 1, 0, 1]);
    assert_eq!(accuracy(&c), 0.9);
}

#[test]
fn two_way_tie_is_reproducible() {
    let first = combine_majority(&[0, 1], 2, 77).unwrap();
    for _ in 0..10 {
        assert_eq!(combine_majority(&[0, 1], 2, 77).unwrap(), first);
        assert_eq!(combine_majority(&[1, 0], 2, 77).unwrap(), first);
    }
}

#[test]
fn empty_inputs_are_errors() {
    assert!(combine_max(&[]).is_err());
    assert!(combine_average(&[]).is_err());
    assert!(combine_majority(&[], 2, 0).is_err());
}

fn shuffled<T: Clone>(xs: &[T], seed: u64) -> Vec<T> {
    let mut v = xs.to_vec();
    SplitMix64::new(seed).shuffle(&mut v);
    v
}

proptest! {
    #[test]
    fn combiners_ignore_input_order(
        scores in prop::collection::vec(-1e6f64..1e6, 1..20),
        votes in prop::collection::vec(0usize..4, 1..20),
        seed in any::<u64>(),
        tie in any::<u64>(),
    ) {
        prop_assert_eq!(combine_max(&scores), combine_max(&shuffled(&scores, seed)));
        prop_assert_eq!(combine_average(&scores), combine_average(&shuffled(&scores, seed)));
        prop_assert_eq!(
            combine_majority(&votes, 4, tie),
            combine_majority(&shuffled(&votes, seed), 4, tie)
        );
    }

    #[test]
    fn average_lies_between_min_and_max(scores in prop::collection::vec(-1e3f64..1e3, 1..50)) {
        let avg = combine_average(&scores).unwrap();
        let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(avg <= combine_max(&scores).unwrap() + 1e-9 && avg >= lo - 1e-9);
    }

    #[test]
    fn odd_binary_votes_never_flip_a_coin(
        half in 0usize..10,
        bits in prop::collection::vec(0usize..2, 21),
        tie in any::<u64>(),
    ) {
        let votes = &bits[..2 * half + 1];
        let out = majority_vote(votes, 2, tie).unwrap();
        prop_assert!(!out.tie_broken);
        let ones = votes.iter().filter(|&&v| v == 1).count();
        prop_assert_eq!(out.label, usize::from(2 * ones > votes.len()));
    }
}

fn noisy_pair(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = SplitMix64::new(seed);
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let rows = labels
        .iter()
        .map(|&l| {
            let perfect = if l == 1 {
                rng.uniform(0.6, 1.0)
            } else {
                rng.uniform(0.0, 0.4)
            };
            vec![perfect, rng.uniform(0.0, 1.0)]
        })
        .collect();
    (rows, labels)
}

#[test]
fn meta_is_at_least_as_good_as_the_perfect_component() {
    let (rows, labels) = noisy_pair(200, 3);
    let meta = train_meta_combiner(&rows, &labels, 2, &MetaParams::default()).unwrap();
    let meta_acc = (0..rows.len())
        .filter(|&i| apply_meta(&meta, &rows[i]).unwrap() == labels[i])
        .count();
    let alone = (0..rows.len())
        .filter(|&i| usize::from(rows[i][0] >= 0.5) == labels[i])
        .count();
    assert_eq!(alone, 200);
    assert!(meta_acc >= alone, "{meta_acc} < {alone}");
}

struct First;

impl Scorer for First {
    fn score(&self, x: Instance<'_>) -> Result<f64> {
        Ok(x.features[0])
    }
}

#[test]
fn single_input_meta_is_a_threshold() {
    let (rows, labels) = noisy_pair(100, 8);
    let single: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0]]).collect();
    let meta = train_meta_combiner(&single, &labels, 2, &MetaParams::default()).unwrap();
    let (w, b, st) = (meta.weights[0][0], meta.biases[0], meta.stats[0]);
    assert!(w > 0.0);
    let theta = st.mean - b * st.std / w;
    let thresholded = threshold_classifier(First, theta);
    for i in 0..=1000 {
        let s = i as f64 / 1000.0;
        if (s - theta).abs() < 1e-9 {
            continue;
        }
        assert_eq!(
            apply_meta(&meta, &[s]).unwrap(),
            thresholded.classify(Instance::vector(&[s])).unwrap(),
            "{s}"
        );
    }
}

#[test]
fn duplicated_component_keeps_decisions() {
    let (rows, labels) = noisy_pair(120, 21);
    let single: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0]]).collect();
    let doubled: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0], r[0]]).collect();
    let p = MetaParams {
        epochs: 500,
        ..MetaParams::default()
    };
    let a = train_meta_combiner(&single, &labels, 2, &p).unwrap();
    let b = train_meta_combiner(&doubled, &labels, 2, &p).unwrap();
    for i in 0..rows.len() {
        assert_eq!(
            apply_meta(&a, &single[i]).unwrap(),
            apply_meta(&b, &doubled[i]).unwrap()
        );
    }
}

#[test]
fn rescaling_a_component_leaves_zscored_decisions_unchanged() {
    let (rows, labels) = noisy_pair(150, 5);
    let base = train_meta_combiner(&rows, &labels, 2, &MetaParams::default()).unwrap();
    for c in [0.25, 2.0, 8.0, 1024.0] {
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0] * c, r[1]]).collect();
        let meta = train_meta_combiner(&scaled, &labels, 2, &MetaParams::default()).unwrap();
        for i in 0..rows.len() {
            assert_eq!(
                meta.normalized_inputs(&scaled[i]).unwrap(),
                base.normalized_inputs(&rows[i]).unwrap()
            );
            assert_eq!(
                apply_meta(&meta, &scaled[i]).unwrap(),
                apply_meta(&base, &rows[i]).unwrap()
            );
        }
    }
}

#[test]
fn meta_rejects_degenerate_inputs() {
    assert!(train_meta_combiner(&[vec![], vec![]], &[0, 1], 2, &MetaParams::default()).is_err());
    assert!(train_meta_combiner(&[vec![1.0], vec![2.0]], &[1, 1], 2, &MetaParams::default()).is_err());
}
