//! Mistake-driven perceptron over fixed-length feature vectors.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::model::{FeatureMatrix, Instance, Scorer};
use crate::params::ParamSet;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptronParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub init_seed: u64,
    /// Initial weights and bias are drawn uniformly from `[-init_scale, init_scale]`.
    pub init_scale: f64,
}

impl Default for PerceptronParams {
    fn default() -> Self {
        PerceptronParams {
            epochs: 100,
            learning_rate: 1.0,
            init_seed: 0,
            init_scale: 1.0,
        }
    }
}

impl PerceptronParams {
    pub fn from_params(p: &ParamSet) -> Result<Self> {
        let d = PerceptronParams::default();
        let out = PerceptronParams {
            epochs: p.count_or("epochs", d.epochs)?,
            learning_rate: p.real_or("learning_rate", d.learning_rate)?,
            init_seed: p.seed_or("init_seed", p.seed_or("seed", d.init_seed)?)?,
            init_scale: p.real_or("init_scale", d.init_scale)?,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn to_params(&self) -> ParamSet {
        ParamSet::new()
            .with("epochs", self.epochs)
            .with("learning_rate", self.learning_rate)
            .with("init_seed", self.init_seed)
            .with("init_scale", self.init_scale)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::invalid("epochs", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate", "must be positive"));
        }
        if !(self.init_scale >= 0.0) {
            return Err(Error::invalid("init_scale", "must be non-negative"));
        }
        Ok(())
    }

    pub fn with_seed(&self, init_seed: u64) -> Self {
        PerceptronParams {
            init_seed,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptronModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub epochs_run: usize,
    /// Mistakes made during each epoch.
    pub epoch_errors: Vec<usize>,
}

impl PerceptronModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        math::dot(&self.weights, x) + self.bias
    }

    /// `min_i y_i (w·x_i + b) / ‖w‖` with `y ∈ {-1, +1}`; negative when a
    /// point is misclassified.
    pub fn geometric_margin(&self, v: &FeatureMatrix, labels: &[usize]) -> f64 {
        let norm = math::sqrt(math::dot(&self.weights, &self.weights));
        if norm == 0.0 {
            return 0.0;
        }
        (0..v.len())
            .map(|i| sign(labels[i]) * self.decision(v.column(i)) / norm)
            .fold(f64::INFINITY, f64::min)
    }

    /// Training points misclassified (score `< 0` for class 1, `≥ 0` for class 0).
    pub fn training_errors(&self, v: &FeatureMatrix, labels: &[usize]) -> usize {
        (0..v.len())
            .filter(|&i| usize::from(self.decision(v.column(i)) >= 0.0) != labels[i])
            .count()
    }
}

fn sign(label: usize) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Trains a binary perceptron on labels in `{0, 1}`.
///
/// Samples are visited in column order; an epoch without mistakes ends
/// training. All-one-class labels return [`Error::DegenerateLabels`].
pub fn train_perceptron(v: &FeatureMatrix, labels: &[usize], params: &PerceptronParams) -> Result<PerceptronModel> {
    params.validate()?;
    if v.is_empty() || v.dim() == 0 {
        return Err(Error::Empty("feature matrix"));
    }
    if labels.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: v.len(),
            found: labels.len(),
        });
    }
    if let Some(&label) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::LabelOutOfRange { label, classes: 2 });
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::DegenerateLabels);
    }

    let mut rng = SplitMix64::new(params.init_seed);
    let s = params.init_scale;
    let mut weights: Vec<f64> = (0..v.dim()).map(|_| rng.uniform(-s, s)).collect();
    let mut bias = rng.uniform(-s, s);
    let mut epoch_errors = Vec::new();
    for _ in 0..params.epochs {
        let mut mistakes = 0;
        for (i, &label) in labels.iter().enumerate() {
            let x = v.column(i);
            let y = sign(label);
            let activation = math::dot(&weights, x) + bias;
            // Points exactly on the hyperplane count as mistakes for both classes.
            if y * activation <= 0.0 {
                mistakes += 1;
                let step = params.learning_rate * y;
                weights.iter_mut().zip(x).for_each(|(w, xi)| *w += step * xi);
                bias += step;
            }
        }
        epoch_errors.push(mistakes);
        if mistakes == 0 {
            break;
        }
    }
    Ok(PerceptronModel {
        weights,
        bias,
        epochs_run: epoch_errors.len(),
        epoch_errors,
    })
}

impl Scorer for PerceptronModel {
    fn score(&self, x: Instance<'_>) -> Result<f64> {
        if x.features.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                found: x.features.len(),
            });
        }
        Ok(self.decision(x.features))
    }
}
