//! Stacking: heterogeneous members combined by a label vote or by a learned
//! linear meta-classifier over their class scores.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::combiners::{apply_meta, combine_majority, train_meta_combiner, MetaCombiner, MetaParams};
use crate::error::{Error, Result};
use crate::model::{ClassScorer, Classify, FeatureMatrix, Instance};
use crate::rng::{derive_seed, SplitMix64};

/// `Ŝ(x) = majority(Ŝ_1(x), .., Ŝ_ℓ(x))`.
///
/// Each sample gets its own tie stream, mixed from `tie_seed` and the
/// sample's content, so ties on different samples are independent coin flips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingStack<C> {
    pub members: Vec<C>,
    pub n_classes: usize,
    pub tie_seed: u64,
}

fn common_classes<I: IntoIterator<Item = usize>>(counts: I) -> Result<usize> {
    let mut iter = counts.into_iter();
    let first = iter.next().ok_or(Error::Empty("stack members"))?;
    for k in iter {
        if k != first {
            return Err(Error::InconsistentClasses {
                expected: first,
                found: k,
            });
        }
    }
    Ok(first)
}

pub fn build_voting_stack<C: Classify>(members: Vec<C>, tie_seed: u64) -> Result<VotingStack<C>> {
    let n_classes = common_classes(members.iter().map(Classify::n_classes))?;
    Ok(VotingStack {
        members,
        n_classes,
        tie_seed,
    })
}

impl<C: Classify> VotingStack<C> {
    pub fn votes(&self, x: Instance<'_>) -> Result<Vec<usize>> {
        self.members.iter().map(|m| m.classify(x)).collect()
    }
}

impl<C: Classify> Classify for VotingStack<C> {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn classify(&self, x: Instance<'_>) -> Result<usize> {
        combine_majority(&self.votes(x)?, self.n_classes, x.content_seed(self.tie_seed))
    }
}

/// Fold index for every sample. Each class is shuffled separately and dealt
/// round-robin, so every fold sees every class with at least `k` members.
pub fn stratified_folds(labels: &[usize], n_classes: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::invalid("folds", "must be at least 2"));
    }
    if labels.len() < k {
        return Err(Error::invalid("folds", "more folds than samples"));
    }
    let mut fold = vec![0; labels.len()];
    let mut offset = 0;
    for c in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        SplitMix64::new(derive_seed(seed, c as u64)).shuffle(&mut members);
        for (pos, &i) in members.iter().enumerate() {
            fold[i] = (offset + pos) % k;
        }
        // Continue dealing where the previous class stopped to keep folds balanced.
        offset = (offset + members.len()) % k;
    }
    Ok(fold)
}

/// Class scores of every sample from a model that never saw it: `train` is
/// called once per fold on the remaining samples.
pub fn out_of_fold_scores<M, F>(
    v: &FeatureMatrix,
    labels: &[usize],
    folds: &[usize],
    k: usize,
    mut train: F,
) -> Result<Vec<Vec<f64>>>
where
    M: ClassScorer,
    F: FnMut(&FeatureMatrix, &[usize]) -> Result<M>,
{
    let mut out = vec![Vec::new(); v.len()];
    for f in 0..k {
        let (held, kept): (Vec<usize>, Vec<usize>) = (0..v.len()).partition(|&i| folds[i] == f);
        if held.is_empty() {
            continue;
        }
        let train_labels: Vec<usize> = kept.iter().map(|&i| labels[i]).collect();
        let model = train(&v.select_columns(&kept), &train_labels)?;
        for &i in &held {
            out[i] = model.class_scores(v.instance(i))?;
        }
    }
    Ok(out)
}

/// Members' concatenated class scores fed to a linear meta-classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaStack<C> {
    pub members: Vec<C>,
    pub meta: MetaCombiner,
}

impl<C: ClassScorer> MetaStack<C> {
    pub fn inputs(&self, x: Instance<'_>) -> Result<Vec<f64>> {
        let mut row = Vec::new();
        for m in &self.members {
            row.extend(m.class_scores(x)?);
        }
        Ok(row)
    }
}

impl<C: ClassScorer> Classify for MetaStack<C> {
    fn n_classes(&self) -> usize {
        self.meta.n_classes
    }

    fn classify(&self, x: Instance<'_>) -> Result<usize> {
        apply_meta(&self.meta, &self.inputs(x)?)
    }
}

/// Stacks `ℓ` members with a meta-classifier trained on out-of-fold member
/// scores; the returned members are then refitted on all of `V`.
/// `train(j, V', labels')` trains member `j`.
pub fn train_meta_stack<C, F>(
    v: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    n_members: usize,
    folds: usize,
    params: &MetaParams,
    mut train: F,
) -> Result<MetaStack<C>>
where
    C: ClassScorer,
    F: FnMut(usize, &FeatureMatrix, &[usize]) -> Result<C>,
{
    if n_members == 0 {
        return Err(Error::Empty("stack members"));
    }
    let assignment = stratified_folds(labels, n_classes, folds, params.seed)?;
    let mut rows = vec![Vec::new(); v.len()];
    for j in 0..n_members {
        let scores = out_of_fold_scores(v, labels, &assignment, folds, |view, l| train(j, view, l))
            .map_err(Error::in_component(j))?;
        for (row, s) in rows.iter_mut().zip(scores) {
            row.extend(s);
        }
    }
    let meta = train_meta_combiner(&rows, labels, n_classes, params)?;
    let members = (0..n_members)
        .map(|j| train(j, v, labels).map_err(Error::in_component(j)))
        .collect::<Result<Vec<_>>>()?;
    common_classes(members.iter().map(ClassScorer::n_classes))?;
    Ok(MetaStack { members, meta })
}
