//! Depth-one decision trees fitted to a weight distribution over samples.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassScorer, FeatureMatrix, Instance, Scorer};
use crate::scorers::tree::{check_labels, midpoint};

/// Weighted errors closer than this are treated as tied.
pub const ERROR_TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StumpModel {
    /// `None` for the constant stump, used when no feature has two distinct values.
    pub feature: Option<usize>,
    pub threshold: f64,
    pub left_class: usize,
    pub right_class: usize,
    pub n_classes: usize,
    pub n_features: usize,
    /// Weighted training error under the weights it was fitted to.
    pub weighted_error: f64,
}

impl StumpModel {
    /// `x[feature] <= threshold` predicts `left_class`.
    pub fn predict(&self, x: &[f64]) -> usize {
        match self.feature {
            Some(f) if x[f] > self.threshold => self.right_class,
            _ => self.left_class,
        }
    }

    /// `+1` when larger values predict class 1, `-1` when they predict
    /// class 0, `0` for a stump that predicts one class on both sides.
    pub fn polarity(&self) -> i8 {
        match (self.left_class, self.right_class) {
            (l, r) if l == r => 0,
            (_, 1) => 1,
            _ => -1,
        }
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

impl ClassScorer for StumpModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn class_scores(&self, x: Instance<'_>) -> Result<Vec<f64>> {
        self.check(x.features)?;
        let mut out = vec![0.0; self.n_classes];
        out[self.predict(x.features)] = 1.0;
        Ok(out)
    }
}

impl Scorer for StumpModel {
    /// The predicted label as a number; threshold at 0.5 for binary use.
    fn score(&self, x: Instance<'_>) -> Result<f64> {
        self.check(x.features)?;
        Ok(self.predict(x.features) as f64)
    }
}

pub(crate) fn check_weights(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: weights.len(),
        });
    }
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("weights", "must be finite and non-negative"));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("weights", alloc::format!("must sum to 1, got {sum}")));
    }
    Ok(())
}

/// Exhaustive weighted-error minimization over every feature and every
/// midpoint between consecutive distinct values. Each side predicts its
/// weighted-majority class. Ties keep the lowest feature, then the lowest
/// threshold.
pub fn train_stump(v: &FeatureMatrix, labels: &[usize], n_classes: usize, weights: &[f64]) -> Result<StumpModel> {
    search(v, labels, n_classes, weights, |_, _| false).map(|s| s.expect("unrestricted search always yields a stump"))
}

/// As [`train_stump`] but never returns a split for which `skip(feature,
/// threshold)` holds. `None` when every split is excluded.
pub fn train_stump_excluding<F>(
    v: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    weights: &[f64],
    skip: F,
) -> Result<Option<StumpModel>>
where
    F: Fn(usize, f64) -> bool,
{
    let found = search(v, labels, n_classes, weights, skip)?;
    Ok(found.filter(|s| s.feature.is_some()))
}

/// Every `(feature, threshold)` split in search order.
pub fn stump_candidates(v: &FeatureMatrix) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for f in 0..v.dim() {
        let mut values: Vec<f64> = v.columns().iter().map(|c| c[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        out.extend(values.windows(2).map(|w| (f, midpoint(w[0], w[1]))));
    }
    out
}

fn argmax_lowest(xs: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = k;
        }
    }
    best
}

fn search<F>(
    v: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    weights: &[f64],
    skip: F,
) -> Result<Option<StumpModel>>
where
    F: Fn(usize, f64) -> bool,
{
    check_labels(v, labels, n_classes)?;
    check_weights(weights, v.len())?;
    let mut class_total = vec![0.0; n_classes];
    for (&l, &w) in labels.iter().zip(weights) {
        class_total[l] += w;
    }
    let total: f64 = class_total.iter().sum();

    let mut best: Option<StumpModel> = None;
    let mut any_split = false;
    let mut order: Vec<(f64, usize, f64)> = Vec::with_capacity(v.len());
    let mut left = vec![0.0; n_classes];
    let mut right = vec![0.0; n_classes];
    for f in 0..v.dim() {
        order.clear();
        order.extend((0..v.len()).map(|i| (v.column(i)[f], labels[i], weights[i])));
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        left.iter_mut().for_each(|x| *x = 0.0);
        for k in 0..order.len() - 1 {
            left[order[k].1] += order[k].2;
            if order[k].0 == order[k + 1].0 {
                continue;
            }
            any_split = true;
            let threshold = midpoint(order[k].0, order[k + 1].0);
            if skip(f, threshold) {
                continue;
            }
            for c in 0..n_classes {
                right[c] = class_total[c] - left[c];
            }
            let (lc, rc) = (argmax_lowest(&left), argmax_lowest(&right));
            let error = (total - left[lc] - right[rc]).max(0.0);
            if best.as_ref().is_none_or(|b| error < b.weighted_error - ERROR_TIE_EPS) {
                best = Some(StumpModel {
                    feature: Some(f),
                    threshold,
                    left_class: lc,
                    right_class: rc,
                    n_classes,
                    n_features: v.dim(),
                    weighted_error: error,
                });
            }
        }
    }
    if best.is_none() && !any_split {
        let class = argmax_lowest(&class_total);
        best = Some(StumpModel {
            feature: None,
            threshold: 0.0,
            left_class: class,
            right_class: class,
            n_classes,
            n_features: v.dim(),
            weighted_error: (total - class_total[class]).max(0.0),
        });
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> FeatureMatrix {
        FeatureMatrix::from_columns(xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    #[test]
    fn separable_line_has_zero_error() {
        let v = line(&[-2.0, -1.0, 1.0, 2.0]);
        let s = train_stump(&v, &[0, 0, 1, 1], 2, &[0.25; 4]).unwrap();
        assert_eq!(s.weighted_error, 0.0);
        assert_eq!((s.feature, s.threshold), (Some(0), 0.0));
        assert_eq!(s.polarity(), 1);
    }

    #[test]
    fn heavy_point_is_classified_correctly() {
        // The point at 0.0 looks mislabeled but carries almost all the weight.
        let v = line(&[-3.0, -2.0, 0.0, 2.0, 3.0]);
        let labels = [0, 0, 1, 0, 0];
        let w = [0.0075, 0.0075, 0.97, 0.0075, 0.0075];
        let s = train_stump(&v, &labels, 2, &w).unwrap();
        assert_eq!(s.predict(&[0.0]), 1);
        assert!((s.weighted_error - 0.015).abs() < 1e-12);
    }

    #[test]
    fn constant_columns_give_constant_stump() {
        let v = line(&[1.0, 1.0, 1.0]);
        let s = train_stump(&v, &[0, 1, 1], 2, &[0.2, 0.4, 0.4]).unwrap();
        assert_eq!(s.feature, None);
        assert_eq!(s.left_class, 1);
        assert!((s.weighted_error - 0.2).abs() < 1e-15);
    }

    #[test]
    fn weights_must_be_a_distribution() {
        let v = line(&[0.0, 1.0]);
        assert!(train_stump(&v, &[0, 1], 2, &[0.5, 0.6]).is_err());
        assert!(train_stump(&v, &[0, 1], 2, &[0.5]).is_err());
    }

    #[test]
    fn exclusion_skips_used_splits() {
        let v = line(&[-2.0, -1.0, 1.0, 2.0]);
        let s = train_stump_excluding(&v, &[0, 0, 1, 1], 2, &[0.25; 4], |_, t| t == 0.0)
            .unwrap()
            .unwrap();
        assert_ne!(s.threshold, 0.0);
        assert!(train_stump_excluding(&v, &[0, 0, 1, 1], 2, &[0.25; 4], |_, _| true)
            .unwrap()
            .is_none());
        assert_eq!(stump_candidates(&v), vec![(0, -1.5), (0, 0.0), (0, 1.5)]);
    }
}
