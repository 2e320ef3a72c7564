//! Generated Markov-chain corpora.

use std::path::Path;

use ensemblekit_core::data::{generate_sequences, scene_specs, synthetic_mnemonic, SceneParams, SyntheticFamilySpec};
use serde::{Deserialize, Serialize};

use crate::corpus::{sample_file_name, write_corpus, Corpus, CorpusOptions};
use crate::error::{Error, Result};
use crate::files::{to_json, write_file};

pub const MANIFEST_FILE: &str = "synthetic.json";
pub const MANIFEST_FORMAT: &str = "ensemblekit-synthetic";
pub const MANIFEST_VERSION: u32 = 1;

/// Overrides on top of the default eight-family scene.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub vocab_size: Option<usize>,
    pub counts: Option<Vec<usize>>,
    pub length: Option<usize>,
    pub separation: Option<f64>,
    pub peakedness: Option<f64>,
    /// Seed of the transition matrices; defaults to the generation seed.
    pub seed: Option<u64>,
}

impl SceneConfig {
    pub fn params(&self, seed: u64) -> SceneParams {
        let d = SceneParams::default_scene(self.seed.unwrap_or(seed));
        SceneParams {
            vocab_size: self.vocab_size.unwrap_or(d.vocab_size),
            counts: self.counts.clone().unwrap_or(d.counts),
            length: self.length.unwrap_or(d.length),
            separation: self.separation.unwrap_or(d.separation),
            peakedness: self.peakedness.unwrap_or(d.peakedness),
            seed: d.seed,
        }
    }
}

/// Either a scene description or explicit family chains.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub scene: Option<SceneConfig>,
    pub families: Vec<SyntheticFamilySpec>,
}

impl SyntheticSpec {
    pub fn default_scene() -> Self {
        SyntheticSpec {
            scene: Some(SceneConfig::default()),
            families: Vec::new(),
        }
    }

    pub fn family_specs(&self, seed: u64) -> Result<Vec<SyntheticFamilySpec>> {
        match (&self.scene, self.families.is_empty()) {
            (Some(scene), true) => Ok(scene_specs(&scene.params(seed))?),
            (None, false) => Ok(self.families.clone()),
            (Some(_), false) => Err(Error::Corpus(
                "give either a scene or explicit families, not both".into(),
            )),
            (None, true) => Err(Error::Corpus("synthetic spec has neither a scene nor families".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticManifest {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub families: Vec<SyntheticFamilySpec>,
}

/// `(id, mnemonics)` pairs of one family.
pub type FamilySamples = Vec<(String, Vec<String>)>;

/// Mnemonic sequences per family, with the ids they get on disk.
pub fn generate_mnemonics(specs: &[SyntheticFamilySpec], seed: u64) -> Result<Vec<FamilySamples>> {
    let seqs = generate_sequences(specs, seed)?;
    Ok(specs
        .iter()
        .zip(seqs)
        .map(|(spec, family)| {
            let n = family.len();
            family
                .into_iter()
                .enumerate()
                .map(|(i, s)| {
                    let id = format!("{}/{}", spec.name, sample_file_name(&spec.name, i, n));
                    (id, s.into_iter().map(synthetic_mnemonic).collect())
                })
                .collect()
        })
        .collect())
}

/// The corpus that loading the output of `generate_synthetic` would give,
/// without touching disk: families ordered by name, as the loader does.
pub fn synthetic_corpus(specs: &[SyntheticFamilySpec], seed: u64, options: &CorpusOptions) -> Result<Corpus> {
    let mut families: Vec<(String, FamilySamples)> = specs
        .iter()
        .map(|s| s.name.clone())
        .zip(generate_mnemonics(specs, seed)?)
        .collect();
    families.sort_by(|a, b| a.0.cmp(&b.0));
    let (names, samples) = families.into_iter().unzip();
    Corpus::from_families(names, samples, options)
}

/// Writes the generated corpus in the standard layout under `out`, plus a
/// manifest recording the chains and the seed.
pub fn generate_synthetic(specs: &[SyntheticFamilySpec], seed: u64, out: &Path) -> Result<SyntheticManifest> {
    let mut names: Vec<&str> = specs.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) || names.iter().any(|n| n.is_empty() || n.contains(['/', '\\'])) {
        return Err(Error::Corpus(
            "family names must be unique, non-empty directory names".into(),
        ));
    }
    let generated = generate_mnemonics(specs, seed)?;
    let families: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
    let seqs: Vec<Vec<Vec<String>>> = generated
        .into_iter()
        .map(|f| f.into_iter().map(|(_, s)| s).collect())
        .collect();
    write_corpus(out, &families, &seqs)?;
    let manifest = SyntheticManifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        seed,
        families: specs.to_vec(),
    };
    write_file(&out.join(MANIFEST_FILE), to_json(&manifest))?;
    Ok(manifest)
}
