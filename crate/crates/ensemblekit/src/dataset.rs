//! Split a corpus, build the training vocabulary and the feature matrices.

use ensemblekit_core::data::{stratified_split, Vocabulary};
use ensemblekit_core::model::FeatureSpace;
use ensemblekit_core::{FeatureMatrix, Representation, Sample};

use crate::corpus::Corpus;
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub class_names: Vec<String>,
    pub vocabulary: Vocabulary,
    pub space: FeatureSpace,
    pub train: FeatureMatrix,
    pub train_labels: Vec<usize>,
    pub train_ids: Vec<String>,
    pub test: FeatureMatrix,
    pub test_labels: Vec<usize>,
    pub test_ids: Vec<String>,
    pub discarded: Vec<usize>,
}

impl Dataset {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }
}

/// Splits per family, then builds the vocabulary from the training side
/// only; test mnemonics never seen in training map to the reserved id.
pub fn prepare(
    corpus: &Corpus,
    test_fraction: f64,
    split_seed: u64,
    representation: Representation,
    vocab_cap: Option<usize>,
) -> Result<Dataset> {
    let labels = corpus.labels();
    let (train, test) = stratified_split(&labels, test_fraction, split_seed)?;
    let vocabulary = Vocabulary::build(train.iter().map(|&i| corpus.samples[i].mnemonics.as_slice()), vocab_cap);
    let encode = |idx: &[usize]| -> Vec<Sample> {
        idx.iter()
            .map(|&i| {
                let s = &corpus.samples[i];
                Sample::new(s.id.clone(), vocabulary.encode(&s.mnemonics), Some(s.family))
            })
            .collect()
    };
    let (train_samples, test_samples) = (encode(&train), encode(&test));
    let space = FeatureSpace::fit(&train_samples, vocabulary.len(), representation)?;
    Ok(Dataset {
        class_names: corpus.families.clone(),
        train: space.transform(&train_samples)?,
        test: space.transform(&test_samples)?,
        train_labels: train.iter().map(|&i| labels[i]).collect(),
        test_labels: test.iter().map(|&i| labels[i]).collect(),
        train_ids: train_samples.into_iter().map(|s| s.id).collect(),
        test_ids: test_samples.into_iter().map(|s| s.id).collect(),
        vocabulary,
        space,
        discarded: corpus.discarded.clone(),
    })
}
