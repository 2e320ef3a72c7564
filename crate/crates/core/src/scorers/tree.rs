//! CART classification trees with Gini impurity, and random forests of them.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::model::{ClassScorer, FeatureMatrix, Instance, Scorer};
use crate::params::ParamSet;
use crate::rng::{derive_seed, SplitMix64};

/// Candidate features examined at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    /// `⌊√m⌋`; the classifier meaning of "auto".
    Auto,
    Sqrt,
    Log2,
    Count(usize),
}

impl MaxFeatures {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "all" | "none" => Ok(MaxFeatures::All),
            "auto" => Ok(MaxFeatures::Auto),
            "sqrt" => Ok(MaxFeatures::Sqrt),
            "log2" => Ok(MaxFeatures::Log2),
            other => other
                .parse()
                .map(MaxFeatures::Count)
                .map_err(|_| Error::invalid("max_features", alloc::format!("unknown value `{other}`"))),
        }
    }

    pub fn name(&self) -> alloc::string::String {
        match self {
            MaxFeatures::All => "all".into(),
            MaxFeatures::Auto => "auto".into(),
            MaxFeatures::Sqrt => "sqrt".into(),
            MaxFeatures::Log2 => "log2".into(),
            MaxFeatures::Count(k) => alloc::format!("{k}"),
        }
    }

    /// Number of candidate features out of `m`, at least one.
    pub fn resolve(&self, m: usize) -> usize {
        let k = match self {
            MaxFeatures::All => m,
            MaxFeatures::Auto | MaxFeatures::Sqrt => math::sqrt(m as f64) as usize,
            MaxFeatures::Log2 => math::log2(m as f64) as usize,
            MaxFeatures::Count(k) => *k,
        };
        k.clamp(1, m.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
            seed: 0,
        }
    }
}

impl TreeParams {
    pub fn from_params(p: &ParamSet) -> Result<Self> {
        let d = TreeParams::default();
        let max_depth = match p.get("max_depth") {
            None => d.max_depth,
            Some(crate::ParamValue::Text(t)) if t == "none" => None,
            Some(_) => Some(p.count_or("max_depth", 0)?),
        };
        let out = TreeParams {
            max_depth,
            min_samples_split: p.count_or("min_samples_split", d.min_samples_split)?,
            min_samples_leaf: p.count_or("min_samples_leaf", d.min_samples_leaf)?,
            max_features: match p.get("max_features") {
                None => d.max_features,
                Some(v) => MaxFeatures::parse(&alloc::format!("{v}"))?,
            },
            seed: p.seed_or("seed", d.seed)?,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn to_params(&self) -> ParamSet {
        let mut p = ParamSet::new();
        match self.max_depth {
            Some(d) => p.set("max_depth", d),
            None => p.set("max_depth", "none"),
        }
        p.with("min_samples_split", self.min_samples_split)
            .with("min_samples_leaf", self.min_samples_leaf)
            .with("max_features", self.max_features.name().as_str())
            .with("seed", self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_depth == Some(0) {
            return Err(Error::invalid("max_depth", "must be at least 1"));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::invalid("min_samples_leaf", "must be at least 1"));
        }
        if self.min_samples_split < 2 {
            return Err(Error::invalid("min_samples_split", "must be at least 2"));
        }
        if self.max_features == MaxFeatures::Count(0) {
            return Err(Error::invalid("max_features", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: Vec<usize>,
    },
}

/// Binary tree stored as an arena; node 0 is the root. Samples with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub n_classes: usize,
    pub n_features: usize,
    pub nodes: Vec<Node>,
}

impl TreeModel {
    pub fn leaf_counts(&self, x: &[f64]) -> &[usize] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { counts } => return counts,
            }
        }
    }

    /// Majority class of the reached leaf, lowest index on ties.
    pub fn predict(&self, x: &[f64]) -> usize {
        majority(self.leaf_counts(x))
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        Ok(())
    }
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best
}

impl ClassScorer for TreeModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Class fractions in the reached leaf.
    fn class_scores(&self, x: Instance<'_>) -> Result<Vec<f64>> {
        self.check(x.features)?;
        let counts = self.leaf_counts(x.features);
        let total: usize = counts.iter().sum();
        Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }
}

impl Scorer for TreeModel {
    /// Fraction of class 1 in the reached leaf.
    fn score(&self, x: Instance<'_>) -> Result<f64> {
        Ok(self.class_scores(x)?.get(1).copied().unwrap_or(0.0))
    }
}

pub(crate) fn check_labels(v: &FeatureMatrix, labels: &[usize], n_classes: usize) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Empty("feature matrix"));
    }
    if labels.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: v.len(),
            found: labels.len(),
        });
    }
    if n_classes < 2 {
        return Err(Error::TooFewClasses(n_classes));
    }
    match labels.iter().find(|&&l| l >= n_classes) {
        Some(&label) => Err(Error::LabelOutOfRange {
            label,
            classes: n_classes,
        }),
        None => Ok(()),
    }
}

pub fn train_tree(v: &FeatureMatrix, labels: &[usize], n_classes: usize, params: &TreeParams) -> Result<TreeModel> {
    params.validate()?;
    check_labels(v, labels, n_classes)?;
    let rows: Vec<usize> = (0..v.len()).collect();
    Ok(grow(
        v,
        labels,
        n_classes,
        params,
        rows,
        &mut SplitMix64::new(params.seed),
    ))
}

/// Grows a tree over `rows`, which may repeat indices (bootstrap samples).
fn grow(
    v: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    params: &TreeParams,
    rows: Vec<usize>,
    rng: &mut SplitMix64,
) -> TreeModel {
    let mut tree = TreeModel {
        n_classes,
        n_features: v.dim(),
        nodes: Vec::new(),
    };
    let n_candidates = params.max_features.resolve(v.dim());
    let mut stack = vec![(0usize, rows, 0usize)];
    tree.nodes.push(Node::Leaf { counts: Vec::new() });
    while let Some((at, rows, depth)) = stack.pop() {
        let mut counts = vec![0usize; n_classes];
        rows.iter().for_each(|&r| counts[labels[r]] += 1);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_ok = params.max_depth.is_none_or(|d| depth < d);
        let split = if pure || !depth_ok || rows.len() < params.min_samples_split {
            None
        } else {
            let features: Vec<usize> = if n_candidates >= v.dim() {
                (0..v.dim()).collect()
            } else {
                rng.sample_indices(v.dim(), n_candidates)
            };
            best_split(v, labels, n_classes, &rows, &features, params.min_samples_leaf)
        };
        match split {
            None => tree.nodes[at] = Node::Leaf { counts },
            Some((feature, threshold)) => {
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| v.column(i)[feature] <= threshold);
                let left = tree.nodes.len();
                tree.nodes.push(Node::Leaf { counts: Vec::new() });
                let right = tree.nodes.len();
                tree.nodes.push(Node::Leaf { counts: Vec::new() });
                tree.nodes[at] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                stack.push((right, r, depth + 1));
                stack.push((left, l, depth + 1));
            }
        }
    }
    tree
}

/// Midpoint between two consecutive distinct sorted values, kept strictly
/// below `hi` so the `<=` test separates them.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

/// Lowest-Gini split over `features`; ties keep the lowest feature index,
/// then the lowest threshold.
fn best_split(
    v: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64)> {
    let n = rows.len();
    let mut total = vec![0u64; n_classes];
    rows.iter().for_each(|&r| total[labels[r]] += 1);
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut left = vec![0u64; n_classes];
    for &f in features {
        order.clear();
        order.extend(rows.iter().map(|&r| (v.column(r)[f], labels[r])));
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        left.iter_mut().for_each(|c| *c = 0);
        // Σ_k count_k² on each side; minimizing weighted Gini maximizes
        // sq_left / n_left + sq_right / n_right.
        let mut sq_left = 0u64;
        let mut sq_right: u64 = total.iter().map(|c| c * c).sum();
        for k in 0..n - 1 {
            let class = order[k].1;
            let right_c = total[class] - left[class];
            sq_left += 2 * left[class] + 1;
            sq_right -= 2 * right_c - 1;
            left[class] += 1;
            let n_left = k + 1;
            if order[k].0 == order[k + 1].0 || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let purity = sq_left as f64 / n_left as f64 + sq_right as f64 / (n - n_left) as f64;
            if best.is_none_or(|(p, _, _)| purity > p + 1e-12 * p.abs().max(1.0)) {
                best = Some((purity, f, midpoint(order[k].0, order[k + 1].0)));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub tree: TreeParams,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 100,
            tree: TreeParams {
                max_features: MaxFeatures::Auto,
                ..TreeParams::default()
            },
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn from_params(p: &ParamSet) -> Result<Self> {
        let d = ForestParams::default();
        let with_default_features = if p.get("max_features").is_none() {
            p.clone().with("max_features", "auto")
        } else {
            p.clone()
        };
        let out = ForestParams {
            n_estimators: p.count_or("n_estimators", d.n_estimators)?,
            tree: TreeParams::from_params(&with_default_features)?,
            bootstrap: p.text_or("bootstrap", "true")? == "true",
            seed: p.seed_or("seed", d.seed)?,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn to_params(&self) -> ParamSet {
        self.tree
            .to_params()
            .with("n_estimators", self.n_estimators)
            .with("bootstrap", if self.bootstrap { "true" } else { "false" })
            .with("seed", self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_estimators < 1 {
            return Err(Error::invalid("n_estimators", "must be at least 1"));
        }
        self.tree.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_classes: usize,
    pub trees: Vec<TreeModel>,
    /// Seed that drove each tree's bootstrap and feature subsets.
    pub tree_seeds: Vec<u64>,
}

/// Tree `t` draws its bootstrap sample and per-split feature subsets from
/// `derive_seed(seed, t)`.
pub fn train_forest(
    v: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    params: &ForestParams,
) -> Result<ForestModel> {
    params.validate()?;
    check_labels(v, labels, n_classes)?;
    let n = v.len();
    let mut trees = Vec::with_capacity(params.n_estimators);
    let mut tree_seeds = Vec::with_capacity(params.n_estimators);
    for t in 0..params.n_estimators {
        let seed = derive_seed(params.seed, t as u64);
        let mut rng = SplitMix64::new(seed);
        let rows = if params.bootstrap {
            rng.bootstrap_indices(n, n)
        } else {
            (0..n).collect()
        };
        trees.push(grow(v, labels, n_classes, &params.tree, rows, &mut rng));
        tree_seeds.push(seed);
    }
    Ok(ForestModel {
        n_classes,
        trees,
        tree_seeds,
    })
}

impl ClassScorer for ForestModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Fraction of tree votes per class.
    fn class_scores(&self, x: Instance<'_>) -> Result<Vec<f64>> {
        let mut votes = vec![0.0; self.n_classes];
        for tree in &self.trees {
            tree.check(x.features)?;
            votes[tree.predict(x.features)] += 1.0;
        }
        let n = self.trees.len() as f64;
        votes.iter_mut().for_each(|v| *v /= n);
        Ok(votes)
    }
}

impl Scorer for ForestModel {
    fn score(&self, x: Instance<'_>) -> Result<f64> {
        Ok(self.class_scores(x)?.get(1).copied().unwrap_or(0.0))
    }
}
