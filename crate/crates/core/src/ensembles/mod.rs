//! Ensemble builders and the declarative [`EnsembleSpec`] that selects one.

pub mod bagging;
pub mod boosting;
pub mod stacking;

pub use bagging::{bag_features, bag_samples, build_bagged_ensemble, BagMember, Bagged, Bagging, SampleBagging};
pub use boosting::{
    adaboost, average_perceptrons, bagged_boosted_hmm, bagged_perceptron, component_seed, hmm_random_restarts,
    AdaBoostParams, AveragedPerceptron, BoostStage, BoostedModel, RestartOutcome, StopReason, WeakPool,
};
pub use stacking::{
    build_voting_stack, out_of_fold_scores, stratified_folds, train_meta_stack, MetaStack, VotingStack,
};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::combiners::CombinerKind;
use crate::error::{Error, Result};
use crate::model::{
    argmax_with_ties, ClassScorer, Classify, FeatureMatrix, Instance, Normalizer, NormalizerKind, PerClass, ScoreStats,
    Scorer,
};
use crate::params::ParamSet;
use crate::rng::derive_seed;
use crate::scorers::{
    train_forest, train_hmm, train_perceptron, train_stump, train_tree, Family, ForestModel, ForestParams, HmmModel,
    HmmParams, PerceptronModel, PerceptronParams, StumpModel, TreeModel, TreeParams,
};

/// How components differ by reparameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Boosting {
    None,
    /// Best of `restarts` HMM initializations.
    Restarts {
        restarts: usize,
    },
    /// SAMME over decision stumps.
    AdaBoost(AdaBoostParams),
    /// `components` perceptrons merged by averaging their weights.
    WeightAverage,
}

/// Declarative description of one ensemble.
///
/// A `seed` missing from `params` is taken from `master_seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub base: Family,
    pub params: ParamSet,
    /// `ℓ`: bags, or averaged perceptrons.
    pub components: usize,
    pub bagging: Bagging,
    pub boosting: Boosting,
    pub combiner: CombinerKind,
    pub normalizer: NormalizerKind,
    pub master_seed: u64,
}

impl EnsembleSpec {
    /// A single base scorer, no ensembling.
    pub fn standard(base: Family, params: ParamSet, master_seed: u64) -> Self {
        EnsembleSpec {
            base,
            params,
            components: 1,
            bagging: Bagging::NONE,
            boosting: Boosting::None,
            combiner: CombinerKind::Average,
            normalizer: NormalizerKind::None,
            master_seed,
        }
    }

    pub fn with_bagging(mut self, bagging: Bagging, components: usize) -> Self {
        self.bagging = bagging;
        self.components = components;
        self
    }

    pub fn with_boosting(mut self, boosting: Boosting) -> Self {
        self.boosting = boosting;
        self
    }

    pub fn with_combiner(mut self, combiner: CombinerKind) -> Self {
        self.combiner = combiner;
        self
    }

    pub fn with_normalizer(mut self, normalizer: NormalizerKind) -> Self {
        self.normalizer = normalizer;
        self
    }

    fn seeded_params(&self) -> ParamSet {
        if self.params.get("seed").is_some() {
            self.params.clone()
        } else {
            self.params.clone().with("seed", self.master_seed)
        }
    }

    fn unsupported(&self, what: &str) -> Error {
        Error::Unsupported(format!("{what} for base family {}", self.base.name()))
    }

    /// Rejects combinations no builder implements, and bad parameters.
    pub fn validate(&self) -> Result<()> {
        if self.components < 1 {
            return Err(Error::invalid("components", "must be at least 1"));
        }
        self.bagging.validate()?;
        let bagged = !self.bagging.is_none();
        if bagged && self.combiner == CombinerKind::Meta {
            return Err(Error::Unsupported("meta combiner inside a bag; use a stack".into()));
        }
        let params = self.seeded_params();
        match self.base {
            Family::Hmm => {
                HmmParams::from_params(&params)?;
                if self.bagging.features.is_some() {
                    return Err(self.unsupported("feature bagging"));
                }
                if bagged && self.combiner == CombinerKind::Majority {
                    return Err(self.unsupported("majority vote over log-likelihoods"));
                }
                match self.boosting {
                    Boosting::None => {}
                    Boosting::Restarts { restarts } if restarts >= 1 => {}
                    Boosting::Restarts { .. } => return Err(Error::invalid("boosting.restarts", "must be at least 1")),
                    _ => return Err(self.unsupported("this boosting mode")),
                }
            }
            Family::Perceptron => {
                PerceptronParams::from_params(&params)?;
                if bagged {
                    return Err(self.unsupported("bagging"));
                }
                if !matches!(self.boosting, Boosting::None | Boosting::WeightAverage) {
                    return Err(self.unsupported("this boosting mode"));
                }
            }
            Family::Tree => {
                TreeParams::from_params(&params)?;
                if self.boosting != Boosting::None {
                    return Err(self.unsupported("boosting"));
                }
            }
            Family::Forest => {
                ForestParams::from_params(&params)?;
                if bagged || self.boosting != Boosting::None {
                    return Err(self.unsupported("extra bagging or boosting"));
                }
            }
            Family::Stump => {
                if bagged {
                    return Err(self.unsupported("bagging"));
                }
                match &self.boosting {
                    Boosting::None => {}
                    Boosting::AdaBoost(p) => p.validate()?,
                    _ => return Err(self.unsupported("this boosting mode")),
                }
            }
        }
        Ok(())
    }

    pub fn tie_seed(&self) -> u64 {
        derive_seed(self.master_seed, u64::MAX)
    }
}

/// A trained multiclass model of any supported construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum MulticlassModel {
    Hmm(PerClass<HmmModel>),
    BaggedHmm(PerClass<Bagged<HmmModel>>),
    Perceptron(PerClass<PerceptronModel>),
    Tree(TreeModel),
    BaggedTrees(Bagged<TreeModel>),
    Forest(ForestModel),
    Stump(StumpModel),
    Boosted(BoostedModel),
}

impl ClassScorer for MulticlassModel {
    fn n_classes(&self) -> usize {
        match self {
            MulticlassModel::Hmm(m) => m.n_classes(),
            MulticlassModel::BaggedHmm(m) => m.n_classes(),
            MulticlassModel::Perceptron(m) => m.n_classes(),
            MulticlassModel::Tree(m) => m.n_classes(),
            MulticlassModel::BaggedTrees(m) => m.n_classes(),
            MulticlassModel::Forest(m) => m.n_classes(),
            MulticlassModel::Stump(m) => m.n_classes(),
            MulticlassModel::Boosted(m) => m.n_classes(),
        }
    }

    fn class_scores(&self, x: Instance<'_>) -> Result<Vec<f64>> {
        match self {
            MulticlassModel::Hmm(m) => m.class_scores(x),
            MulticlassModel::BaggedHmm(m) => m.class_scores(x),
            MulticlassModel::Perceptron(m) => m.class_scores(x),
            MulticlassModel::Tree(m) => m.class_scores(x),
            MulticlassModel::BaggedTrees(m) => m.class_scores(x),
            MulticlassModel::Forest(m) => m.class_scores(x),
            MulticlassModel::Stump(m) => m.class_scores(x),
            MulticlassModel::Boosted(m) => m.class_scores(x),
        }
    }
}

/// A trained ensemble with its spec; classifies by argmax with seeded ties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedEnsemble {
    pub spec: EnsembleSpec,
    pub model: MulticlassModel,
    pub tie_seed: u64,
}

impl ClassScorer for TrainedEnsemble {
    fn n_classes(&self) -> usize {
        self.model.n_classes()
    }

    fn class_scores(&self, x: Instance<'_>) -> Result<Vec<f64>> {
        self.model.class_scores(x)
    }
}

impl Classify for TrainedEnsemble {
    fn n_classes(&self) -> usize {
        self.model.n_classes()
    }

    fn classify(&self, x: Instance<'_>) -> Result<usize> {
        Ok(argmax_with_ties(&self.model.class_scores(x)?, self.tie_seed))
    }
}

/// A named series recorded during training, such as a log-likelihood curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub curves: Vec<Curve>,
    pub warnings: Vec<String>,
}

impl TrainingLog {
    fn curve(&mut self, name: String, values: Vec<f64>) {
        self.curves.push(Curve { name, values });
    }
}

fn class_columns(labels: &[usize], n_classes: usize) -> Result<Vec<Vec<usize>>> {
    let mut out: Vec<Vec<usize>> = (0..n_classes).map(|_| Vec::new()).collect();
    for (i, &l) in labels.iter().enumerate() {
        out.get_mut(l)
            .ok_or(Error::LabelOutOfRange {
                label: l,
                classes: n_classes,
            })?
            .push(i);
    }
    if out.iter().any(Vec::is_empty) {
        return Err(Error::Empty("training samples for a class"));
    }
    Ok(out)
}

/// Per-class training-score statistics: scorer `c` on the samples of class `c`.
fn normalizer_for<S: Scorer>(
    kind: NormalizerKind,
    scorers: &[S],
    v: &FeatureMatrix,
    by_class: &[Vec<usize>],
) -> Result<Normalizer> {
    match kind {
        NormalizerKind::None => Ok(Normalizer::None),
        NormalizerKind::Zscore => {
            let stats = scorers
                .iter()
                .zip(by_class)
                .map(|(s, cols)| {
                    let scores = cols
                        .iter()
                        .map(|&i| s.score(v.instance(i)))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(ScoreStats::from_scores(&scores))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Normalizer::ZScore(stats))
        }
    }
}

/// Trains the ensemble described by `spec` on `(V, labels)` over `K` classes.
///
/// Generative and binary scorers (HMM, perceptron) are trained one per class
/// (one-vs-rest for the perceptron) and read through an argmax; trees,
/// forests and stumps are natively multiclass.
pub fn train_ensemble(
    spec: &EnsembleSpec,
    v: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
) -> Result<(TrainedEnsemble, TrainingLog)> {
    spec.validate()?;
    if labels.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: v.len(),
            found: labels.len(),
        });
    }
    if n_classes < 2 {
        return Err(Error::TooFewClasses(n_classes));
    }
    let params = spec.seeded_params();
    let mut log = TrainingLog::default();
    let model = match spec.base {
        Family::Hmm => train_hmm_family(spec, &params, v, labels, n_classes, &mut log)?,
        Family::Perceptron => {
            let template = PerceptronParams::from_params(&params)?;
            let by_class = class_columns(labels, n_classes)?;
            let mut scorers = Vec::with_capacity(n_classes);
            for c in 0..n_classes {
                let ovr: Vec<usize> = labels.iter().map(|&l| usize::from(l == c)).collect();
                let model = match spec.boosting {
                    Boosting::WeightAverage => {
                        let avg = bagged_perceptron(v, &ovr, &template, spec.components)?;
                        if avg.degenerate_margin {
                            log.warnings
                                .push(format!("class {c}: averaged perceptron weights cancel out"));
                        }
                        avg.model
                    }
                    _ => train_perceptron(v, &ovr, &template)?,
                };
                log.curve(
                    format!("class{c}.epoch_errors"),
                    model.epoch_errors.iter().map(|&e| e as f64).collect(),
                );
                scorers.push(model);
            }
            let normalizer = normalizer_for(spec.normalizer, &scorers, v, &by_class)?;
            MulticlassModel::Perceptron(PerClass::new(scorers, normalizer)?)
        }
        Family::Tree => {
            let tp = TreeParams::from_params(&params)?;
            if spec.bagging.is_none() {
                MulticlassModel::Tree(train_tree(v, labels, n_classes, &tp)?)
            } else {
                MulticlassModel::BaggedTrees(build_bagged_ensemble(
                    v,
                    labels,
                    spec.components,
                    &spec.bagging,
                    spec.combiner,
                    spec.master_seed,
                    |view, l| train_tree(view, l, n_classes, &tp),
                )?)
            }
        }
        Family::Forest => MulticlassModel::Forest(train_forest(
            v,
            labels,
            n_classes,
            &ForestParams::from_params(&params)?,
        )?),
        Family::Stump => match &spec.boosting {
            Boosting::AdaBoost(ap) => {
                let boosted = adaboost(v, labels, n_classes, ap)?;
                log.curve("stage_error".into(), boosted.stage_errors());
                log.curve("alpha".into(), boosted.alphas());
                MulticlassModel::Boosted(boosted)
            }
            _ => {
                let w = alloc::vec![1.0 / v.len() as f64; v.len()];
                MulticlassModel::Stump(train_stump(v, labels, n_classes, &w)?)
            }
        },
    };
    Ok((
        TrainedEnsemble {
            spec: spec.clone(),
            model,
            tie_seed: spec.tie_seed(),
        },
        log,
    ))
}

fn train_hmm_family(
    spec: &EnsembleSpec,
    params: &ParamSet,
    v: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    log: &mut TrainingLog,
) -> Result<MulticlassModel> {
    let template = HmmParams::from_params(params)?;
    let by_class = class_columns(labels, n_classes)?;
    let restarts = match spec.boosting {
        Boosting::Restarts { restarts } => restarts,
        _ => 1,
    };
    match spec.bagging.samples {
        None => {
            let mut scorers = Vec::with_capacity(n_classes);
            for (c, cols) in by_class.iter().enumerate() {
                let sub = v.select_columns(cols);
                let model = if restarts == 1 {
                    train_hmm(&sub, &template)?
                } else {
                    let out = hmm_random_restarts(&sub, &template, restarts)?;
                    for (i, h) in out.histories.iter().enumerate() {
                        log.curve(format!("class{c}.restart{i}"), h.clone());
                    }
                    if out.stalled {
                        log.warnings
                            .push(format!("class {c}: no restart improved on its initialization"));
                    }
                    out.best
                };
                log.curve(format!("class{c}"), model.loglik_history.clone());
                scorers.push(model);
            }
            let normalizer = normalizer_for(spec.normalizer, &scorers, v, &by_class)?;
            Ok(MulticlassModel::Hmm(PerClass::new(scorers, normalizer)?))
        }
        Some(sampling) => {
            let mut scorers = Vec::with_capacity(n_classes);
            for (c, cols) in by_class.iter().enumerate() {
                let sub = v.select_columns(cols);
                let seed = derive_seed(spec.master_seed, c as u64);
                let mut out = bagged_boosted_hmm(&sub, &template, restarts, spec.components, sampling, seed)?;
                for (b, m) in out.model.members.iter().enumerate() {
                    log.curve(format!("class{c}.bag{b}"), m.model.loglik_history.clone());
                }
                for (b, s) in out.bags.iter().enumerate() {
                    if s.stalled {
                        log.warnings
                            .push(format!("class {c} bag {b}: no restart improved on its initialization"));
                    }
                }
                out.model.combiner = spec.combiner;
                scorers.push(out.model);
            }
            let normalizer = normalizer_for(spec.normalizer, &scorers, v, &by_class)?;
            Ok(MulticlassModel::BaggedHmm(PerClass::new(scorers, normalizer)?))
        }
    }
}
