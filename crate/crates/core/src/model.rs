//! Samples, the feature matrix `V`, and the scorer/classifier abstractions.
//!
//! `V` is stored column-major: column `i` is the feature vector of sample
//! `i`, each row is one feature type. A matrix may additionally carry the raw
//! token sequences (the sequence view) for scorers such as HMMs that consume
//! sequences rather than fixed-length vectors.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::rng::{self, SplitMix64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub tokens: Vec<u32>,
    pub label: Option<usize>,
}

impl Sample {
    pub fn new(id: impl Into<String>, tokens: Vec<u32>, label: Option<usize>) -> Self {
        Sample {
            id: id.into(),
            tokens,
            label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// Relative token frequencies.
    Histogram,
    /// Relative frequencies of the retained `n`-grams.
    Ngram(usize),
    /// Token sequences, plus the histogram as the vector part.
    Sequence,
}

/// Largest `V^n` for which n-gram features enumerate every possible n-gram.
/// Beyond it only n-grams observed while fitting are retained.
pub const MAX_DENSE_NGRAMS: usize = 1 << 16;

/// Fitted mapping from token sequences to feature rows. Fit it on training
/// samples and reuse it for test samples so both land in the same rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    vocab_size: usize,
    representation: Representation,
    /// Sorted retained n-grams when not enumerating densely.
    ngrams: Option<Vec<Vec<u32>>>,
}

impl FeatureSpace {
    pub fn fit(samples: &[Sample], vocab_size: usize, representation: Representation) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("sample list"));
        }
        if vocab_size == 0 {
            return Err(Error::Empty("vocabulary"));
        }
        for s in samples {
            check_tokens(&s.tokens, vocab_size)?;
        }
        let ngrams = match representation {
            Representation::Ngram(0) => return Err(Error::invalid("ngram", "n must be at least 1")),
            Representation::Ngram(n) if dense_ngram_count(vocab_size, n).is_none() => {
                let mut seen: Vec<Vec<u32>> = samples
                    .iter()
                    .flat_map(|s| s.tokens.windows(n).map(|w| w.to_vec()))
                    .collect();
                seen.sort_unstable();
                seen.dedup();
                Some(seen)
            }
            _ => None,
        };
        Ok(FeatureSpace {
            vocab_size,
            representation,
            ngrams,
        })
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Feature dimension `m`.
    pub fn dim(&self) -> usize {
        match (self.representation, &self.ngrams) {
            (Representation::Ngram(_), Some(list)) => list.len(),
            (Representation::Ngram(n), None) => dense_ngram_count(self.vocab_size, n).unwrap_or(0),
            _ => self.vocab_size,
        }
    }

    pub fn row_labels(&self) -> Vec<String> {
        match (self.representation, &self.ngrams) {
            (Representation::Ngram(_), Some(list)) => list.iter().map(|g| join_ids(g)).collect(),
            (Representation::Ngram(n), None) => (0..self.dim())
                .map(|row| join_ids(&decode_dense(row, self.vocab_size, n)))
                .collect(),
            _ => (0..self.vocab_size).map(|t| format!("{t}")).collect(),
        }
    }

    /// Feature vector of one token sequence.
    pub fn vectorize(&self, tokens: &[u32]) -> Result<Vec<f64>> {
        check_tokens(tokens, self.vocab_size)?;
        if tokens.is_empty() {
            return Err(Error::Empty("token sequence"));
        }
        let mut column = vec![0.0; self.dim()];
        match self.representation {
            Representation::Histogram | Representation::Sequence => {
                for &t in tokens {
                    column[t as usize] += 1.0;
                }
            }
            Representation::Ngram(n) => {
                if tokens.len() < n {
                    return Err(Error::invalid("ngram", "sequence shorter than n"));
                }
                for w in tokens.windows(n) {
                    let row = match &self.ngrams {
                        None => Some(encode_dense(w, self.vocab_size)),
                        Some(list) => list.binary_search_by(|g| g.as_slice().cmp(w)).ok(),
                    };
                    if let Some(row) = row {
                        column[row] += 1.0;
                    }
                }
            }
        }
        let total: f64 = column.iter().sum();
        if total > 0.0 {
            column.iter_mut().for_each(|c| *c /= total);
        }
        Ok(column)
    }

    pub fn transform(&self, samples: &[Sample]) -> Result<FeatureMatrix> {
        if samples.is_empty() {
            return Err(Error::Empty("sample list"));
        }
        let columns = samples
            .iter()
            .map(|s| self.vectorize(&s.tokens))
            .collect::<Result<Vec<_>>>()?;
        let sequences = (self.representation == Representation::Sequence)
            .then(|| samples.iter().map(|s| s.tokens.clone()).collect());
        Ok(FeatureMatrix {
            rows: self.dim(),
            columns,
            sequences,
            row_labels: self.row_labels(),
            vocab_size: self.vocab_size,
        })
    }
}

fn check_tokens(tokens: &[u32], vocab_size: usize) -> Result<()> {
    match tokens.iter().find(|&&t| t as usize >= vocab_size) {
        Some(&token) => Err(Error::TokenOutOfVocabulary { token, vocab_size }),
        None => Ok(()),
    }
}

fn dense_ngram_count(vocab_size: usize, n: usize) -> Option<usize> {
    let mut count = 1usize;
    for _ in 0..n {
        count = count.checked_mul(vocab_size)?;
        if count > MAX_DENSE_NGRAMS {
            return None;
        }
    }
    Some(count)
}

fn encode_dense(gram: &[u32], vocab_size: usize) -> usize {
    gram.iter().fold(0, |acc, &t| acc * vocab_size + t as usize)
}

fn decode_dense(mut row: usize, vocab_size: usize, n: usize) -> Vec<u32> {
    let mut gram = vec![0u32; n];
    for slot in gram.iter_mut().rev() {
        *slot = (row % vocab_size) as u32;
        row /= vocab_size;
    }
    gram
}

fn join_ids(gram: &[u32]) -> String {
    let mut out = String::new();
    for (i, t) in gram.iter().enumerate() {
        if i > 0 {
            out.push('-');
        }
        out.push_str(&format!("{t}"));
    }
    out
}

/// Builds `V` for `samples` over a vocabulary of `vocab_size` tokens.
pub fn build_feature_matrix(
    samples: &[Sample],
    vocab_size: usize,
    representation: Representation,
) -> Result<FeatureMatrix> {
    FeatureSpace::fit(samples, vocab_size, representation)?.transform(samples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    rows: usize,
    columns: Vec<Vec<f64>>,
    sequences: Option<Vec<Vec<u32>>>,
    row_labels: Vec<String>,
    vocab_size: usize,
}

impl FeatureMatrix {
    /// Matrix from explicit columns, without a sequence view.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let rows = columns.first().map(Vec::len).ok_or(Error::Empty("column list"))?;
        let row_labels = (0..rows).map(|r| format!("f{r}")).collect();
        Self::new(columns, None, row_labels, 0)
    }

    pub fn new(
        columns: Vec<Vec<f64>>,
        sequences: Option<Vec<Vec<u32>>>,
        row_labels: Vec<String>,
        vocab_size: usize,
    ) -> Result<Self> {
        let rows = row_labels.len();
        if let Some(bad) = columns.iter().find(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch {
                expected: rows,
                found: bad.len(),
            });
        }
        if let Some(seqs) = &sequences {
            if seqs.len() != columns.len() {
                return Err(Error::DimensionMismatch {
                    expected: columns.len(),
                    found: seqs.len(),
                });
            }
            if vocab_size == 0 {
                return Err(Error::Empty("vocabulary"));
            }
            for s in seqs {
                check_tokens(s, vocab_size)?;
            }
        }
        Ok(FeatureMatrix {
            rows,
            columns,
            sequences,
            row_labels,
            vocab_size,
        })
    }

    /// Feature dimension `m`.
    pub fn dim(&self) -> usize {
        self.rows
    }

    /// Sample count `n`.
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn sequences(&self) -> Option<&[Vec<u32>]> {
        self.sequences.as_deref()
    }

    pub fn sequence(&self, i: usize) -> Option<&[u32]> {
        self.sequences.as_ref().map(|s| s[i].as_slice())
    }

    pub fn instance(&self, i: usize) -> Instance<'_> {
        Instance {
            features: &self.columns[i],
            tokens: self.sequence(i),
        }
    }

    pub fn instances(&self) -> impl Iterator<Item = Instance<'_>> {
        (0..self.len()).map(move |i| self.instance(i))
    }

    /// Keeps the listed columns (samples), in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: self.rows,
            columns: indices.iter().map(|&i| self.columns[i].clone()).collect(),
            sequences: self
                .sequences
                .as_ref()
                .map(|s| indices.iter().map(|&i| s[i].clone()).collect()),
            row_labels: self.row_labels.clone(),
            vocab_size: self.vocab_size,
        }
    }

    /// Keeps the listed rows (feature types), in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: rows.len(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
            sequences: self.sequences.clone(),
            row_labels: rows.iter().map(|&r| self.row_labels[r].clone()).collect(),
            vocab_size: self.vocab_size,
        }
    }
}

/// One sample as seen by a scorer: its feature vector and, when available,
/// its token sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Instance<'a> {
    pub features: &'a [f64],
    pub tokens: Option<&'a [u32]>,
}

impl<'a> Instance<'a> {
    pub fn vector(features: &'a [f64]) -> Self {
        Instance { features, tokens: None }
    }

    pub fn tokens(&self) -> Result<&'a [u32]> {
        self.tokens.ok_or(Error::MissingSequenceView)
    }

    /// Content hash, used to give each sample its own tie-breaking stream.
    pub fn content_seed(&self, seed: u64) -> u64 {
        let feats = self.features.iter().map(|f| f.to_bits());
        let toks = self.tokens.unwrap_or(&[]).iter().map(|&t| t as u64);
        rng::hash_words(seed, feats.chain(toks))
    }
}

/// A trained real-valued scoring function `S(x)`.
pub trait Scorer {
    fn score(&self, x: Instance<'_>) -> Result<f64>;
}

/// A trained scorer producing one score per class.
pub trait ClassScorer {
    fn n_classes(&self) -> usize;
    fn class_scores(&self, x: Instance<'_>) -> Result<Vec<f64>>;
}

/// A classification function `Ŝ(x)`.
pub trait Classify {
    fn n_classes(&self) -> usize;
    fn classify(&self, x: Instance<'_>) -> Result<usize>;
}

impl<T: Scorer + ?Sized> Scorer for &T {
    fn score(&self, x: Instance<'_>) -> Result<f64> {
        (**self).score(x)
    }
}

impl<T: ClassScorer + ?Sized> ClassScorer for &T {
    fn n_classes(&self) -> usize {
        (**self).n_classes()
    }
    fn class_scores(&self, x: Instance<'_>) -> Result<Vec<f64>> {
        (**self).class_scores(x)
    }
}

impl<T: Classify + ?Sized> Classify for &T {
    fn n_classes(&self) -> usize {
        (**self).n_classes()
    }
    fn classify(&self, x: Instance<'_>) -> Result<usize> {
        (**self).classify(x)
    }
}

/// Binary classifier `Ŝ(x) = 1` iff `S(x) ≥ θ`. A score equal to the
/// threshold is classified positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdClassifier<S> {
    pub scorer: S,
    pub threshold: f64,
}

pub fn threshold_classifier<S: Scorer>(scorer: S, threshold: f64) -> ThresholdClassifier<S> {
    ThresholdClassifier { scorer, threshold }
}

impl<S: Scorer> Classify for ThresholdClassifier<S> {
    fn n_classes(&self) -> usize {
        2
    }

    fn classify(&self, x: Instance<'_>) -> Result<usize> {
        Ok(usize::from(self.scorer.score(x)? >= self.threshold))
    }
}

/// Mean and (population) standard deviation of a scorer's training scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreStats {
    pub mean: f64,
    pub std: f64,
}

impl ScoreStats {
    pub fn from_scores(scores: &[f64]) -> Self {
        ScoreStats {
            mean: math::mean(scores),
            std: math::std_dev(scores),
        }
    }

    /// Degenerate spreads normalize with unit scale.
    pub fn normalize(&self, score: f64) -> f64 {
        let scale = if self.std > f64::EPSILON { self.std } else { 1.0 };
        (score - self.mean) / scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalizer {
    None,
    ZScore(Vec<ScoreStats>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizerKind {
    None,
    Zscore,
}

/// One binary scorer per class, read as a multiclass scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClass<S> {
    pub scorers: Vec<S>,
    pub normalizer: Normalizer,
}

impl<S: Scorer> PerClass<S> {
    pub fn new(scorers: Vec<S>, normalizer: Normalizer) -> Result<Self> {
        if scorers.len() < 2 {
            return Err(Error::TooFewClasses(scorers.len()));
        }
        if let Normalizer::ZScore(stats) = &normalizer {
            if stats.len() != scorers.len() {
                return Err(Error::MissingNormalization);
            }
        }
        Ok(PerClass { scorers, normalizer })
    }
}

impl<S: Scorer> ClassScorer for PerClass<S> {
    fn n_classes(&self) -> usize {
        self.scorers.len()
    }

    fn class_scores(&self, x: Instance<'_>) -> Result<Vec<f64>> {
        let mut scores = self.scorers.iter().map(|s| s.score(x)).collect::<Result<Vec<_>>>()?;
        if let Normalizer::ZScore(stats) = &self.normalizer {
            for (s, st) in scores.iter_mut().zip(stats) {
                *s = st.normalize(*s);
            }
        }
        Ok(scores)
    }
}

/// Index of the largest score. Exact ties are broken uniformly at random by
/// a stream seeded from `tie_seed` and the tied scores themselves, so a
/// given input always resolves the same way.
pub fn argmax_with_ties(scores: &[f64], tie_seed: u64) -> usize {
    argmax_traced(scores, tie_seed).0
}

/// As [`argmax_with_ties`], also reporting whether the tie stream was used.
pub fn argmax_traced(scores: &[f64], tie_seed: u64) -> (usize, bool) {
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] == best).collect();
    match tied.len() {
        0 => (0, false),
        1 => (tied[0], false),
        n => {
            let seed = rng::hash_words(tie_seed, scores.iter().map(|s| s.to_bits()));
            (tied[SplitMix64::new(seed).below(n)], true)
        }
    }
}

/// Multiclass classifier `argmax_k score_k(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgmaxClassifier<C> {
    pub scorer: C,
    pub tie_seed: u64,
}

impl<C: ClassScorer> ArgmaxClassifier<C> {
    pub fn new(scorer: C, tie_seed: u64) -> Result<Self> {
        if scorer.n_classes() < 2 {
            return Err(Error::TooFewClasses(scorer.n_classes()));
        }
        Ok(ArgmaxClassifier { scorer, tie_seed })
    }
}

impl<C: ClassScorer> Classify for ArgmaxClassifier<C> {
    fn n_classes(&self) -> usize {
        self.scorer.n_classes()
    }

    fn classify(&self, x: Instance<'_>) -> Result<usize> {
        Ok(argmax_with_ties(&self.scorer.class_scores(x)?, self.tie_seed))
    }
}

/// Argmax over one scorer per class.
pub fn argmax_classifier<S: Scorer>(
    per_class: Vec<S>,
    normalizer: Normalizer,
    tie_seed: u64,
) -> Result<ArgmaxClassifier<PerClass<S>>> {
    ArgmaxClassifier::new(PerClass::new(per_class, normalizer)?, tie_seed)
}
