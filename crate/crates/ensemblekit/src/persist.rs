//! Model files: a versioned JSON envelope around a trained model together
//! with everything needed to featurize new samples.

use std::fs;
use std::path::Path;

use ensemblekit_core::data::Vocabulary;
use ensemblekit_core::ensembles::{MetaStack, TrainedEnsemble, VotingStack};
use ensemblekit_core::model::FeatureSpace;
use ensemblekit_core::{Classify, Instance, Sample};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::files::{to_json, write_file};

pub const MODEL_FORMAT: &str = "ensemblekit-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum SavedModel {
    Ensemble(TrainedEnsemble),
    Voting(VotingStack<TrainedEnsemble>),
    Meta(MetaStack<TrainedEnsemble>),
}

impl SavedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            SavedModel::Ensemble(_) => "ensemble",
            SavedModel::Voting(_) => "voting",
            SavedModel::Meta(_) => "meta",
        }
    }
}

impl Classify for SavedModel {
    fn n_classes(&self) -> usize {
        match self {
            SavedModel::Ensemble(m) => Classify::n_classes(m),
            SavedModel::Voting(m) => m.n_classes(),
            SavedModel::Meta(m) => m.n_classes(),
        }
    }

    fn classify(&self, x: Instance<'_>) -> ensemblekit_core::Result<usize> {
        match self {
            SavedModel::Ensemble(m) => m.classify(x),
            SavedModel::Voting(m) => m.classify(x),
            SavedModel::Meta(m) => m.classify(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub class_names: Vec<String>,
    pub vocabulary: Vocabulary,
    pub space: FeatureSpace,
    pub model: SavedModel,
}

impl ModelBundle {
    /// Classifies raw mnemonic sequences.
    pub fn predict<S: AsRef<str>>(&self, sequences: &[Vec<S>]) -> Result<Vec<usize>> {
        let samples: Vec<Sample> = sequences
            .iter()
            .map(|s| Sample::new("", self.vocabulary.encode(s), None))
            .collect();
        let v = self.space.transform(&samples)?;
        Ok(v.instances()
            .map(|x| self.model.classify(x))
            .collect::<ensemblekit_core::Result<_>>()?)
    }
}

#[derive(Serialize)]
struct EnvelopeOut<'a> {
    format: &'static str,
    version: u32,
    kind: &'static str,
    bundle: &'a ModelBundle,
}

#[derive(Deserialize)]
struct EnvelopeIn {
    format: String,
    version: u32,
    kind: String,
    bundle: serde_json::Value,
}

pub fn model_to_json(bundle: &ModelBundle) -> String {
    to_json(&EnvelopeOut {
        format: MODEL_FORMAT,
        version: MODEL_VERSION,
        kind: bundle.model.kind(),
        bundle,
    })
}

pub fn model_from_json(text: &str) -> Result<ModelBundle> {
    let env: EnvelopeIn = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    if env.format != MODEL_FORMAT {
        return Err(Error::Format(format!(
            "format `{}` is not `{MODEL_FORMAT}`",
            env.format
        )));
    }
    if env.version != MODEL_VERSION {
        return Err(Error::Format(format!(
            "version {} (this build reads {MODEL_VERSION})",
            env.version
        )));
    }
    let bundle: ModelBundle = serde_json::from_value(env.bundle).map_err(|e| Error::Format(e.to_string()))?;
    if bundle.model.kind() != env.kind {
        return Err(Error::Format(format!(
            "envelope says `{}` but holds `{}`",
            env.kind,
            bundle.model.kind()
        )));
    }
    Ok(bundle)
}

pub fn save_model(path: &Path, bundle: &ModelBundle) -> Result<()> {
    write_file(path, model_to_json(bundle))
}

pub fn load_model(path: &Path) -> Result<ModelBundle> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    model_from_json(&text)
}
