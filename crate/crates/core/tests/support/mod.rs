//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use ensemblekit_core::metrics::ConfusionMatrix;
use ensemblekit_core::scorers::HmmModel;

/// `ln Σ_paths P(x, path)` by enumerating all `N^|x|` hidden paths.
pub fn path_sum_loglik(m: &HmmModel, x: &[u32]) -> f64 {
    let n = m.n_states();
    let len = x.len();
    let mut total = 0.0;
    let mut path = vec![0usize; len];
    loop {
        let mut p = m.initial()[path[0]] * m.emission_row(path[0])[x[0] as usize];
        for t in 1..len {
            p *= m.transition_row(path[t - 1])[path[t]] * m.emission_row(path[t])[x[t] as usize];
        }
        total += p;
        // Odometer increment over the path digits.
        let mut t = 0;
        loop {
            if t == len {
                return total.ln();
            }
            path[t] += 1;
            if path[t] < n {
                break;
            }
            path[t] = 0;
            t += 1;
        }
    }
}

/// Textbook forward recursion without scaling.
pub fn unscaled_forward_loglik(m: &HmmModel, x: &[u32]) -> f64 {
    let n = m.n_states();
    let mut alpha: Vec<f64> = (0..n)
        .map(|i| m.initial()[i] * m.emission_row(i)[x[0] as usize])
        .collect();
    for &o in &x[1..] {
        alpha = (0..n)
            .map(|j| (0..n).map(|i| alpha[i] * m.transition_row(i)[j]).sum::<f64>() * m.emission_row(j)[o as usize])
            .collect();
    }
    alpha.iter().sum::<f64>().ln()
}

pub fn assert_stochastic(m: &HmmModel, tol: f64) {
    let check = |row: &[f64], what: &str| {
        let s: f64 = row.iter().sum();
        assert!((s - 1.0).abs() <= tol, "{what} sums to {s}");
        assert!(row.iter().all(|&p| p >= 0.0), "{what} has a negative entry");
    };
    check(m.initial(), "initial");
    for i in 0..m.n_states() {
        check(m.transition_row(i), "transition row");
        check(m.emission_row(i), "emission row");
    }
}

/// Accuracy, balanced accuracy and support-weighted precision, recall and F1
/// computed sample by sample from the definitions.
pub fn metrics_by_definition(cm: &ConfusionMatrix) -> [f64; 5] {
    let k = cm.counts.len();
    // Expand the matrix back into individual (truth, prediction) pairs.
    let mut pairs = Vec::new();
    for t in 0..k {
        for p in 0..k {
            for _ in 0..cm.counts[t][p] {
                pairs.push((t, p));
            }
        }
    }
    let n = pairs.len() as f64;
    let correct = pairs.iter().filter(|(t, p)| t == p).count() as f64;
    let mut recalls = Vec::new();
    let (mut prec, mut rec, mut f1) = (0.0, 0.0, 0.0);
    for c in 0..k {
        let tp = pairs.iter().filter(|&&(t, p)| t == c && p == c).count() as f64;
        let fp = pairs.iter().filter(|&&(t, p)| t != c && p == c).count() as f64;
        let fneg = pairs.iter().filter(|&&(t, p)| t == c && p != c).count() as f64;
        let support = tp + fneg;
        let pc = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let rc = if support > 0.0 { tp / support } else { 0.0 };
        let fc = if pc + rc > 0.0 { 2.0 * pc * rc / (pc + rc) } else { 0.0 };
        if support > 0.0 {
            recalls.push(rc);
        }
        prec += pc * support / n;
        rec += rc * support / n;
        f1 += fc * support / n;
    }
    let balanced = recalls.iter().sum::<f64>() / recalls.len() as f64;
    [correct / n, balanced, prec, rec, f1]
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub struct Split {
    pub train: ensemblekit_core::FeatureMatrix,
    pub train_labels: Vec<usize>,
    pub test: ensemblekit_core::FeatureMatrix,
    pub test_labels: Vec<usize>,
    pub n_classes: usize,
}

/// A generated Markov-chain scene split 70/30 per family, with the sequence
/// view attached.
pub fn scene_split(params: &ensemblekit_core::data::SceneParams, split_seed: u64) -> Split {
    use ensemblekit_core::data::{generate_sequences, scene_specs, stratified_split};
    use ensemblekit_core::model::build_feature_matrix;
    use ensemblekit_core::{Representation, Sample};

    let specs = scene_specs(params).unwrap();
    let families = generate_sequences(&specs, params.seed).unwrap();
    let mut samples = Vec::new();
    for (f, seqs) in families.into_iter().enumerate() {
        for (i, s) in seqs.into_iter().enumerate() {
            samples.push(Sample::new(format!("{f}/{i}"), s, Some(f)));
        }
    }
    let labels: Vec<usize> = samples.iter().map(|s| s.label.unwrap()).collect();
    let (train, test) = stratified_split(&labels, 0.3, split_seed).unwrap();
    let pick = |idx: &[usize]| -> (Vec<Sample>, Vec<usize>) {
        (
            idx.iter().map(|&i| samples[i].clone()).collect(),
            idx.iter().map(|&i| labels[i]).collect(),
        )
    };
    let (tr, train_labels) = pick(&train);
    let (te, test_labels) = pick(&test);
    Split {
        train: build_feature_matrix(&tr, params.vocab_size, Representation::Sequence).unwrap(),
        train_labels,
        test: build_feature_matrix(&te, params.vocab_size, Representation::Sequence).unwrap(),
        test_labels,
        n_classes: params.counts.len(),
    }
}

pub fn small_scene(seed: u64) -> ensemblekit_core::data::SceneParams {
    ensemblekit_core::data::SceneParams {
        vocab_size: 6,
        counts: vec![20, 14],
        length: 60,
        separation: 0.3,
        peakedness: 2.0,
        seed,
    }
}

/// Pairs of (reduced ensemble, its base) whose decisions must coincide.
pub fn reduction_pairs(
    seed: u64,
) -> Vec<(
    &'static str,
    ensemblekit_core::ensembles::EnsembleSpec,
    ensemblekit_core::ensembles::EnsembleSpec,
)> {
    use ensemblekit_core::ensembles::{AdaBoostParams, Bagging, Boosting, EnsembleSpec};
    use ensemblekit_core::scorers::Family;
    use ensemblekit_core::ParamSet;

    let hmm = ParamSet::new().with("n_components", 2usize).with("n_iter", 15usize);
    let base = |f: Family, p: &ParamSet| EnsembleSpec::standard(f, p.clone(), seed);
    let tree = ParamSet::new().with("max_depth", 6usize);
    let restarts = |n| Boosting::Restarts { restarts: n };
    vec![
        (
            "bagged hmm",
            base(Family::Hmm, &hmm).with_bagging(Bagging::samples(1.0), 1),
            base(Family::Hmm, &hmm),
        ),
        (
            "hmm restarts",
            base(Family::Hmm, &hmm).with_boosting(restarts(1)),
            base(Family::Hmm, &hmm),
        ),
        (
            "bagged boosted hmm",
            base(Family::Hmm, &hmm)
                .with_bagging(Bagging::samples(1.0), 1)
                .with_boosting(restarts(1)),
            base(Family::Hmm, &hmm),
        ),
        (
            "bagged boosted hmm to restarts",
            base(Family::Hmm, &hmm)
                .with_bagging(Bagging::samples(1.0), 1)
                .with_boosting(restarts(3)),
            base(Family::Hmm, &hmm).with_boosting(restarts(3)),
        ),
        (
            "bagged perceptron",
            base(Family::Perceptron, &ParamSet::new()).with_boosting(Boosting::WeightAverage),
            base(Family::Perceptron, &ParamSet::new()),
        ),
        (
            "adaboost",
            base(Family::Stump, &ParamSet::new()).with_boosting(Boosting::AdaBoost(AdaBoostParams {
                n_estimators: 1,
                ..AdaBoostParams::default()
            })),
            base(Family::Stump, &ParamSet::new()),
        ),
        (
            "sample-bagged tree",
            base(Family::Tree, &tree).with_bagging(Bagging::samples(1.0), 1),
            base(Family::Tree, &tree),
        ),
        (
            "feature-bagged tree",
            base(Family::Tree, &tree).with_bagging(Bagging::features(1.0), 1),
            base(Family::Tree, &tree),
        ),
        (
            "doubly bagged tree",
            base(Family::Tree, &tree).with_bagging(Bagging::both(1.0, 1.0), 1),
            base(Family::Tree, &tree),
        ),
    ]
}
