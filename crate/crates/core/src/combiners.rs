//! Combining functions `F` that turn `ℓ` component scores or labels into one
//! decision.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::model::{argmax_with_ties, ScoreStats};
use crate::params::ParamSet;
use crate::rng::{self, SplitMix64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinerKind {
    Max,
    Average,
    Majority,
    Meta,
}

impl CombinerKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "max" => CombinerKind::Max,
            "average" | "avg" => CombinerKind::Average,
            "majority" | "vote" => CombinerKind::Majority,
            "meta" => CombinerKind::Meta,
            _ => return None,
        })
    }
}

fn check_scores(scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Empty("score vector"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("scores", "must be finite"));
    }
    Ok(())
}

/// `max_i S_i`.
pub fn combine_max(scores: &[f64]) -> Result<f64> {
    check_scores(scores)?;
    Ok(scores.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// `(1/ℓ) Σ_i S_i`.
pub fn combine_average(scores: &[f64]) -> Result<f64> {
    check_scores(scores)?;
    // Summing in sorted order makes the result independent of input order.
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted.iter().sum::<f64>() / sorted.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MajorityOutcome {
    pub label: usize,
    /// Whether the tie stream had to pick among equally voted labels.
    pub tie_broken: bool,
}

/// Plurality vote with the full trace.
pub fn majority_vote(votes: &[usize], n_classes: usize, tie_seed: u64) -> Result<MajorityOutcome> {
    if votes.is_empty() {
        return Err(Error::Empty("vote vector"));
    }
    let mut tally = vec![0usize; n_classes];
    for &v in votes {
        if v >= n_classes {
            return Err(Error::LabelOutOfRange {
                label: v,
                classes: n_classes,
            });
        }
        tally[v] += 1;
    }
    let top = *tally.iter().max().expect("n_classes > 0 when votes are valid");
    let tied: Vec<usize> = (0..n_classes).filter(|&k| tally[k] == top).collect();
    if tied.len() == 1 {
        return Ok(MajorityOutcome {
            label: tied[0],
            tie_broken: false,
        });
    }
    // Seeded by the tally, not the vote order, so permuting voters cannot
    // change the outcome.
    let seed = rng::hash_words(tie_seed, tally.iter().map(|&c| c as u64));
    Ok(MajorityOutcome {
        label: tied[SplitMix64::new(seed).below(tied.len())],
        tie_broken: true,
    })
}

/// Majority vote; a tie is settled by a coin flip drawn from `tie_seed`.
pub fn combine_majority(votes: &[usize], n_classes: usize, tie_seed: u64) -> Result<usize> {
    majority_vote(votes, n_classes, tie_seed).map(|o| o.label)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaParams {
    /// L2 regularization strength.
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    pub normalize: bool,
}

impl Default for MetaParams {
    fn default() -> Self {
        MetaParams {
            lambda: 1e-3,
            epochs: 200,
            seed: 0,
            normalize: true,
        }
    }
}

impl MetaParams {
    pub fn from_params(p: &ParamSet) -> Result<Self> {
        let d = MetaParams::default();
        let out = MetaParams {
            lambda: p.real_or("lambda", d.lambda)?,
            epochs: p.count_or("epochs", d.epochs)?,
            seed: p.seed_or("seed", d.seed)?,
            normalize: p.text_or("normalize", "true")? == "true",
        };
        if !(out.lambda > 0.0) {
            return Err(Error::invalid("lambda", "must be positive"));
        }
        if out.epochs < 1 {
            return Err(Error::invalid("epochs", "must be at least 1"));
        }
        Ok(out)
    }
}

/// Linear max-margin combiner over (optionally z-scored) component scores,
/// trained by Pegasos-style stochastic subgradient descent on the hinge loss.
/// The bias is an extra constant input. Binary problems use one hyperplane;
/// `K > 2` uses one-vs-rest hyperplanes and an argmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaCombiner {
    pub n_inputs: usize,
    pub n_classes: usize,
    pub algorithm: alloc::string::String,
    /// Per-input normalization; empty when disabled.
    pub stats: Vec<ScoreStats>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub tie_seed: u64,
}

impl MetaCombiner {
    fn features(&self, scores: &[f64]) -> Result<Vec<f64>> {
        if scores.len() != self.n_inputs {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs,
                found: scores.len(),
            });
        }
        Ok(if self.stats.is_empty() {
            scores.to_vec()
        } else {
            scores.iter().zip(&self.stats).map(|(&s, st)| st.normalize(s)).collect()
        })
    }

    /// Raw hyperplane values, one per class for `K > 2`, one for `K = 2`.
    pub fn decision_values(&self, scores: &[f64]) -> Result<Vec<f64>> {
        let z = self.features(scores)?;
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| math::dot(w, &z) + b)
            .collect())
    }

    pub fn normalized_inputs(&self, scores: &[f64]) -> Result<Vec<f64>> {
        self.features(scores)
    }
}

/// Trains on `rows[i]` = component scores of sample `i`.
pub fn train_meta_combiner(
    rows: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    params: &MetaParams,
) -> Result<MetaCombiner> {
    let n_inputs = rows.first().map_or(0, Vec::len);
    if n_inputs == 0 {
        return Err(Error::Empty("component scores"));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != n_inputs) {
        return Err(Error::DimensionMismatch {
            expected: n_inputs,
            found: bad.len(),
        });
    }
    if labels.len() != rows.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            found: labels.len(),
        });
    }
    if n_classes < 2 {
        return Err(Error::TooFewClasses(n_classes));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::LabelOutOfRange {
            label,
            classes: n_classes,
        });
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::DegenerateLabels);
    }

    let stats: Vec<ScoreStats> = if params.normalize {
        (0..n_inputs)
            .map(|j| ScoreStats::from_scores(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()))
            .collect()
    } else {
        Vec::new()
    };
    let mut meta = MetaCombiner {
        n_inputs,
        n_classes,
        algorithm: "pegasos-hinge".into(),
        stats,
        weights: Vec::new(),
        biases: Vec::new(),
        tie_seed: params.seed,
    };
    let inputs: Vec<Vec<f64>> = rows.iter().map(|r| meta.features(r)).collect::<Result<_>>()?;

    let targets: Vec<usize> = if n_classes == 2 {
        vec![1]
    } else {
        (0..n_classes).collect()
    };
    for (h, &positive) in targets.iter().enumerate() {
        let ys: Vec<f64> = labels.iter().map(|&l| if l == positive { 1.0 } else { -1.0 }).collect();
        let (w, b) = pegasos(&inputs, &ys, params, rng::derive_seed(params.seed, h as u64));
        meta.weights.push(w);
        meta.biases.push(b);
    }
    Ok(meta)
}

fn pegasos(inputs: &[Vec<f64>], ys: &[f64], params: &MetaParams, seed: u64) -> (Vec<f64>, f64) {
    let d = inputs[0].len();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut rng = SplitMix64::new(seed);
    let mut t = 0.0;
    for _ in 0..params.epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            t += 1.0;
            let eta = 1.0 / (params.lambda * t);
            let margin = ys[i] * (math::dot(&w, &inputs[i]) + b);
            let shrink = 1.0 - eta * params.lambda;
            w.iter_mut().for_each(|x| *x *= shrink);
            b *= shrink;
            if margin < 1.0 {
                let step = eta * ys[i];
                w.iter_mut().zip(&inputs[i]).for_each(|(x, z)| *x += step * z);
                b += step;
            }
        }
    }
    (w, b)
}

/// Class chosen by the meta-classifier for one sample's component scores.
pub fn apply_meta(meta: &MetaCombiner, scores: &[f64]) -> Result<usize> {
    let values = meta.decision_values(scores)?;
    Ok(if meta.n_classes == 2 {
        usize::from(values[0] >= 0.0)
    } else {
        argmax_with_ties(&values, meta.tie_seed)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_and_average() {
        assert_eq!(combine_max(&[0.2, 0.7, 0.5]), Ok(0.7));
        assert_eq!(combine_max(&[3.0, 3.0, 3.0]), Ok(3.0));
        assert_eq!(combine_average(&[1.0, 2.0, 3.0]), Ok(2.0));
        assert_eq!(combine_average(&[-4.5]), Ok(-4.5));
        assert_eq!(combine_max(&[]), Err(Error::Empty("score vector")));
        assert_eq!(combine_average(&[]), Err(Error::Empty("score vector")));
    }

    #[test]
    fn majority_plurality_and_ties() {
        assert_eq!(combine_majority(&[2, 1, 2, 0], 3, 0), Ok(2));
        let a = combine_majority(&[0, 1], 2, 77).unwrap();
        for _ in 0..5 {
            assert_eq!(combine_majority(&[1, 0], 2, 77), Ok(a));
        }
        assert!(majority_vote(&[0, 1], 2, 77).unwrap().tie_broken);
        assert_eq!(combine_majority(&[], 2, 0), Err(Error::Empty("vote vector")));
        assert_eq!(
            combine_majority(&[0, 4], 2, 0),
            Err(Error::LabelOutOfRange { label: 4, classes: 2 })
        );
    }

    #[test]
    fn tie_coin_is_fair_across_seeds() {
        let ones = (0..2000u64)
            .filter(|&s| combine_majority(&[0, 1], 2, s) == Ok(1))
            .count();
        assert!((900..1100).contains(&ones), "{ones}");
    }

    #[test]
    fn meta_rejects_degenerate_inputs() {
        assert_eq!(
            train_meta_combiner(&[vec![], vec![]], &[0, 1], 2, &MetaParams::default()).err(),
            Some(Error::Empty("component scores"))
        );
        assert_eq!(
            train_meta_combiner(&[vec![1.0], vec![2.0]], &[1, 1], 2, &MetaParams::default()).err(),
            Some(Error::DegenerateLabels)
        );
    }

    #[test]
    fn meta_multiclass_separates_blocks() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for k in 0..3 {
            for j in 0..10 {
                let mut r = vec![0.0; 3];
                r[k] = 5.0 + j as f64 * 0.1;
                rows.push(r);
                labels.push(k);
            }
        }
        let meta = train_meta_combiner(&rows, &labels, 3, &MetaParams::default()).unwrap();
        assert_eq!(meta.weights.len(), 3);
        for (r, &l) in rows.iter().zip(&labels) {
            assert_eq!(apply_meta(&meta, r), Ok(l));
        }
    }
}
