//! Boosting in the broad sense: components share `V` and differ only by
//! reparameterization. Covers HMM random restarts, the weight-averaged
//! perceptron, SAMME AdaBoost over stumps, and bagged+boosted HMMs.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::combiners::CombinerKind;
use crate::ensembles::bagging::{draw_columns, BagMember, Bagged, SampleBagging};
use crate::error::{Error, Result};
use crate::math;
use crate::model::{ClassScorer, FeatureMatrix, Instance, Scorer};
use crate::params::ParamSet;
use crate::rng::{derive_seed, SplitMix64};
use crate::scorers::hmm::{train_hmm, HmmModel, HmmParams};
use crate::scorers::perceptron::{train_perceptron, PerceptronModel, PerceptronParams};
use crate::scorers::stump::{train_stump, train_stump_excluding, StumpModel};
use crate::scorers::tree::check_labels;

/// Seed for restart or component `i`: the template's own seed first, then
/// independent derived streams. One restart is therefore the plain model.
pub fn component_seed(template_seed: u64, i: usize) -> u64 {
    if i == 0 {
        template_seed
    } else {
        derive_seed(template_seed, i as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutcome {
    pub best: HmmModel,
    pub best_index: usize,
    /// Final training log-likelihood of each restart, in restart order.
    pub logliks: Vec<f64>,
    /// Training log-likelihood curve of each restart.
    pub histories: Vec<Vec<f64>>,
    /// Set when no restart improved on its own initialization.
    pub stalled: bool,
}

/// Trains `ℓ` HMMs that differ only in their initialization seed and keeps
/// the one with the highest training log-likelihood (lowest index on ties).
pub fn hmm_random_restarts(v: &FeatureMatrix, template: &HmmParams, restarts: usize) -> Result<RestartOutcome> {
    if restarts < 1 {
        return Err(Error::invalid("restarts", "must be at least 1"));
    }
    let mut best: Option<(usize, HmmModel)> = None;
    let mut logliks = Vec::with_capacity(restarts);
    let mut histories = Vec::with_capacity(restarts);
    let mut stalled = true;
    for i in 0..restarts {
        let params = template.with_seed(component_seed(template.seed, i));
        let mut model = train_hmm(v, &params).map_err(Error::in_component(i))?;
        let history = core::mem::take(&mut model.loglik_history);
        if history.last() > history.first() {
            stalled = false;
        }
        logliks.push(model.train_loglik);
        model.loglik_history = history.clone();
        histories.push(history);
        if best.as_ref().is_none_or(|(_, b)| model.train_loglik > b.train_loglik) {
            best = Some((i, model));
        }
    }
    let (best_index, best) = best.expect("at least one restart");
    Ok(RestartOutcome {
        best,
        best_index,
        logliks,
        histories,
        stalled,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragedPerceptron {
    pub model: PerceptronModel,
    pub components: Vec<PerceptronModel>,
    /// Set when the averaged weight vector has (numerically) cancelled out.
    pub degenerate_margin: bool,
}

/// Weight vector and bias that are the arithmetic means of the inputs.
pub fn average_perceptrons(components: &[PerceptronModel]) -> Result<AveragedPerceptron> {
    let first = components.first().ok_or(Error::Empty("perceptron components"))?;
    let m = first.weights.len();
    let mut weights = vec![0.0; m];
    let mut bias = 0.0;
    let mut largest: f64 = 0.0;
    for c in components {
        if c.weights.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: c.weights.len(),
            });
        }
        weights.iter_mut().zip(&c.weights).for_each(|(w, x)| *w += x);
        bias += c.bias;
        largest = largest.max(math::sqrt(math::dot(&c.weights, &c.weights)));
    }
    let n = components.len() as f64;
    weights.iter_mut().for_each(|w| *w /= n);
    bias /= n;
    let norm = math::sqrt(math::dot(&weights, &weights));
    let degenerate_margin = norm <= 1e-12 * largest.max(1.0);
    Ok(AveragedPerceptron {
        model: PerceptronModel {
            weights,
            bias,
            epochs_run: components.iter().map(|c| c.epochs_run).max().unwrap_or(0),
            epoch_errors: Vec::new(),
        },
        components: components.to_vec(),
        degenerate_margin,
    })
}

/// `ℓ` perceptrons on identical data, differing only in `init_seed`, merged
/// into one model by averaging weights (not classifications).
pub fn bagged_perceptron(
    v: &FeatureMatrix,
    labels: &[usize],
    template: &PerceptronParams,
    ell: usize,
) -> Result<AveragedPerceptron> {
    if ell < 1 {
        return Err(Error::invalid("components", "must be at least 1"));
    }
    let components = (0..ell)
        .map(|i| {
            let p = template.with_seed(component_seed(template.init_seed, i));
            train_perceptron(v, labels, &p).map_err(Error::in_component(i))
        })
        .collect::<Result<Vec<_>>>()?;
    average_perceptrons(&components)
}

/// Where AdaBoost finds its weak learner at each stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeakPool {
    /// Refit the best stump on the reweighted data every stage.
    #[default]
    Retrain,
    /// Choose among all pre-enumerated stumps, each split at most once.
    FixedPool,
}

impl WeakPool {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "retrain" => Some(WeakPool::Retrain),
            "fixed_pool" | "fixed-pool" => Some(WeakPool::FixedPool),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub pool: WeakPool,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        AdaBoostParams {
            n_estimators: 50,
            learning_rate: 1.0,
            pool: WeakPool::Retrain,
        }
    }
}

impl AdaBoostParams {
    pub fn from_params(p: &ParamSet) -> Result<Self> {
        let d = AdaBoostParams::default();
        let algorithm = p.text_or("algorithm", "SAMME")?;
        if algorithm != "SAMME" {
            return Err(Error::invalid(
                "algorithm",
                alloc::format!("{algorithm} needs real-valued weak learners; only SAMME is available"),
            ));
        }
        let pool = p.text_or("pool", "retrain")?;
        let out = AdaBoostParams {
            n_estimators: p.count_or("n_estimators", d.n_estimators)?,
            learning_rate: p.real_or("learning_rate", d.learning_rate)?,
            pool: WeakPool::parse(pool).ok_or_else(|| Error::invalid("pool", alloc::format!("unknown pool {pool}")))?,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn to_params(&self) -> ParamSet {
        ParamSet::new()
            .with("n_estimators", self.n_estimators)
            .with("learning_rate", self.learning_rate)
            .with("algorithm", "SAMME")
            .with(
                "pool",
                match self.pool {
                    WeakPool::Retrain => "retrain",
                    WeakPool::FixedPool => "fixed_pool",
                },
            )
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_estimators < 1 {
            return Err(Error::invalid("n_estimators", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning_rate", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostStage {
    pub stump: StumpModel,
    pub alpha: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    StageLimit,
    PerfectFit,
    NoBetterThanChance,
    PoolExhausted,
}

/// `C_M(x) = argmax_k Σ_m α_m [c_m(x) = k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub n_classes: usize,
    pub variant: String,
    pub stages: Vec<BoostStage>,
    pub stop: StopReason,
    /// Sum of the sample weights after each stage's renormalization.
    pub weight_sums: Vec<f64>,
}

impl BoostedModel {
    pub fn stage_errors(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.error).collect()
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.alpha).collect()
    }

    /// Predictions of the first `m` stages, ties to the lowest class.
    pub fn predict_with(&self, x: &[f64], m: usize) -> usize {
        let mut sums = vec![0.0; self.n_classes];
        for s in self.stages.iter().take(m) {
            sums[s.stump.predict(x)] += s.alpha;
        }
        let mut best = 0;
        for (k, &v) in sums.iter().enumerate() {
            if v > sums[best] {
                best = k;
            }
        }
        best
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        self.predict_with(x, self.stages.len())
    }
}

impl ClassScorer for BoostedModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn class_scores(&self, x: Instance<'_>) -> Result<Vec<f64>> {
        let mut sums = vec![0.0; self.n_classes];
        for s in &self.stages {
            let k = s.stump.predict(x.features);
            if x.features.len() != s.stump.n_features {
                return Err(Error::DimensionMismatch {
                    expected: s.stump.n_features,
                    found: x.features.len(),
                });
            }
            sums[k] += s.alpha;
        }
        Ok(sums)
    }
}

impl Scorer for BoostedModel {
    /// Binary margin `Σ α [c = 1] − Σ α [c = 0]`.
    fn score(&self, x: Instance<'_>) -> Result<f64> {
        let s = self.class_scores(x)?;
        Ok(s.get(1).copied().unwrap_or(0.0) - s[0])
    }
}

/// SAMME AdaBoost with decision stumps.
///
/// Stage `m` fits a stump to the current weights, sets
/// `α_m = lr·(ln((1−err)/err) + ln(K−1))`, multiplies the weights of
/// misclassified samples by `exp(α_m)` and renormalizes. Training stops
/// early when `err ≥ 1 − 1/K` (that stage is discarded) or `err = 0` (the
/// perfect stump is kept with `α = 1`, as only relative weights matter).
pub fn adaboost(
    v: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    params: &AdaBoostParams,
) -> Result<BoostedModel> {
    params.validate()?;
    if n_classes < 2 {
        return Err(Error::TooFewClasses(n_classes));
    }
    check_labels(v, labels, n_classes)?;
    let n = v.len();
    let k = n_classes as f64;
    let chance = 1.0 - 1.0 / k;
    let mut weights = vec![1.0 / n as f64; n];
    let mut stages: Vec<BoostStage> = Vec::new();
    let mut weight_sums = Vec::new();
    let mut stop = StopReason::StageLimit;
    let mut used: Vec<(usize, u64)> = Vec::new();

    for m in 0..params.n_estimators {
        let stump = match params.pool {
            WeakPool::Retrain => train_stump(v, labels, n_classes, &weights)?,
            WeakPool::FixedPool => {
                match train_stump_excluding(v, labels, n_classes, &weights, |f, t| used.contains(&(f, t.to_bits())))? {
                    Some(s) => s,
                    None => {
                        stop = StopReason::PoolExhausted;
                        break;
                    }
                }
            }
        };
        let err = stump.weighted_error;
        if err >= chance - 1e-12 {
            if m == 0 {
                return Err(Error::NoWeakLearnability {
                    error: err,
                    classes: n_classes,
                });
            }
            stop = StopReason::NoBetterThanChance;
            break;
        }
        if let Some(f) = stump.feature {
            used.push((f, stump.threshold.to_bits()));
        }
        if err <= 0.0 {
            stages.push(BoostStage {
                stump,
                alpha: 1.0,
                error: 0.0,
            });
            weight_sums.push(weights.iter().sum());
            stop = StopReason::PerfectFit;
            break;
        }
        let alpha = params.learning_rate * (math::ln((1.0 - err) / err) + math::ln(k - 1.0));
        let boost = math::exp(alpha);
        for (i, w) in weights.iter_mut().enumerate() {
            if stump.predict(v.column(i)) != labels[i] {
                *w *= boost;
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        weight_sums.push(weights.iter().sum());
        stages.push(BoostStage {
            stump,
            alpha,
            error: err,
        });
    }
    Ok(BoostedModel {
        n_classes,
        variant: "SAMME".into(),
        stages,
        stop,
        weight_sums,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaggedRestarts {
    pub model: Bagged<HmmModel>,
    /// One restart outcome per bag, without the winning model duplicated.
    pub bags: Vec<RestartSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub best_index: usize,
    pub logliks: Vec<f64>,
    pub stalled: bool,
}

/// `ℓ_b` sample bags, each trained with `ℓ_r` random restarts; the best model
/// of every bag is kept and the bags' log-likelihoods are averaged.
pub fn bagged_boosted_hmm(
    v: &FeatureMatrix,
    template: &HmmParams,
    restarts: usize,
    bags: usize,
    bagging: SampleBagging,
    seed: u64,
) -> Result<BaggedRestarts> {
    if bags < 1 {
        return Err(Error::invalid("bags", "must be at least 1"));
    }
    let mut members = Vec::with_capacity(bags);
    let mut summaries = Vec::with_capacity(bags);
    for b in 0..bags {
        let bag_seed = derive_seed(seed, b as u64);
        let mut rng = SplitMix64::new(bag_seed);
        let cols = draw_columns(v.len(), bagging, &mut rng)?;
        let out = hmm_random_restarts(&v.select_columns(&cols), template, restarts).map_err(Error::in_component(b))?;
        summaries.push(RestartSummary {
            best_index: out.best_index,
            logliks: out.logliks,
            stalled: out.stalled,
        });
        members.push(BagMember {
            model: out.best,
            rows: None,
            bag_seed,
        });
    }
    Ok(BaggedRestarts {
        model: Bagged {
            members,
            combiner: CombinerKind::Average,
        },
        bags: summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> FeatureMatrix {
        FeatureMatrix::from_columns(xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    #[test]
    fn separable_four_points_stop_after_one_stage() {
        let v = line(&[-2.0, -1.0, 1.0, 2.0]);
        let b = adaboost(&v, &[0, 0, 1, 1], 2, &AdaBoostParams::default()).unwrap();
        assert_eq!(b.stages.len(), 1);
        assert_eq!(b.stop, StopReason::PerfectFit);
        for (i, &x) in [-2.0, -1.0, 1.0, 2.0].iter().enumerate() {
            assert_eq!(b.predict(&[x]), usize::from(i >= 2));
        }
    }

    #[test]
    fn cancelling_perceptrons_flag_degenerate_margin() {
        let p = PerceptronModel {
            weights: vec![1.0, -2.0],
            bias: 0.5,
            epochs_run: 1,
            epoch_errors: vec![0],
        };
        let q = PerceptronModel {
            weights: vec![-1.0, 2.0],
            bias: -0.5,
            ..p.clone()
        };
        let avg = average_perceptrons(&[p, q]).unwrap();
        assert_eq!(avg.model.weights, vec![0.0, 0.0]);
        assert!(avg.degenerate_margin);
    }

    #[test]
    fn samme_rejects_chance_level_first_stage() {
        let v = line(&[1.0, 1.0]);
        let err = adaboost(&v, &[0, 1], 2, &AdaBoostParams::default()).unwrap_err();
        assert!(matches!(err, Error::NoWeakLearnability { .. }));
    }

    #[test]
    fn samme_r_is_refused() {
        let p = ParamSet::new().with("algorithm", "SAMME.R");
        assert!(AdaBoostParams::from_params(&p).is_err());
    }
}
