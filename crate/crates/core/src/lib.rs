//! Ensemble classifiers built from real-valued scoring functions.
//!
//! Every learner in this crate is a scoring function `S(x; V, Λ)` trained on a
//! feature matrix `V` under a parameter set `Λ`. Ensembles are combinations
//! `F(S_1, .., S_ℓ)` of such functions:
//!
//! * bagging trains one scorer family with fixed parameters on different
//!   column (sample) or row (feature) subsets of `V`;
//! * boosting keeps `V` fixed and varies the parameters (random restarts,
//!   averaged perceptrons, AdaBoost stage weights);
//! * stacking combines heterogeneous scorers with a vote or a learned
//!   linear meta-classifier.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, corpus loading
//! and the experiment runner live in the `ensemblekit` companion crate.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod combiners;
pub mod data;
pub mod ensembles;
pub mod error;
pub mod math;
pub mod metrics;
pub mod model;
pub mod params;
pub mod rng;
pub mod scorers;

pub use error::{Error, Result};
pub use model::{
    ArgmaxClassifier, ClassScorer, Classify, FeatureMatrix, Instance, Normalizer, Representation, Sample, ScoreStats,
    Scorer, ThresholdClassifier,
};
pub use params::{ParamSet, ParamValue};
